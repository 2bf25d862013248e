#pragma once

namespace sdcap {

// Routes the default logger to stderr. The level comes from SDCAP_LOG
// (trace, debug, info, warn, error, off); the default is warn.
void init_logging();

}  // namespace sdcap
