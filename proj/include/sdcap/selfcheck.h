#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sdcap {

struct LayerCheck {
  std::string layer;
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

// Central-difference gradient checks of every trainable layer on small
// randomly initialized models: embedding, image FC, caption LSTM, word head,
// fusion LSTM (through the blended training loss, with padding on either
// side) and the full pointer-generator step.
std::vector<LayerCheck> layer_grad_checks(std::uint64_t seed, double eps = 1e-5);

}  // namespace sdcap
