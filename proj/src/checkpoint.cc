#include "sdcap/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sdcap/error.h"

namespace sdcap {

namespace {

constexpr char kMagic[8] = {'S', 'D', 'C', 'A', 'P', 'C', 'K', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw LoadError("checkpoint truncated");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint64_t>(out, ckpt.metadata.size());
  out += ckpt.metadata;
  put<std::uint64_t>(out, ckpt.tensors.size());
  for (const auto& t : ckpt.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.value.rank()));
    for (auto d : t.value.shape()) put<std::uint64_t>(out, d);
    for (double v : t.value.data()) put<double>(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.get_bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw LoadError("not a checkpoint (bad magic)");
  }
  Checkpoint ckpt;
  ckpt.metadata = r.get_bytes(r.get<std::uint64_t>());
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.get_bytes(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = r.get<std::uint64_t>();
      n *= d;
    }
    std::vector<double> data(n);
    for (auto& v : data) v = r.get<double>();
    t.value = Tensor(std::move(shape), std::move(data));
    ckpt.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw LoadError("trailing bytes after checkpoint");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw LoadError("cannot open " + path.string() + " for writing");
  const std::string bytes = encode_checkpoint(ckpt);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw LoadError("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_checkpoint(ss.str());
}

void append_store(Checkpoint& ckpt, const ParamStore& store,
                  const std::string& prefix) {
  for (const auto& [name, p] : store) ckpt.tensors.push_back({prefix + name, p.value});
}

ParamStore extract_store(const Checkpoint& ckpt, const std::string& prefix) {
  ParamStore store;
  for (const auto& t : ckpt.tensors) {
    if (t.name.compare(0, prefix.size(), prefix) == 0) {
      store.add(t.name.substr(prefix.size()), t.value);
    }
  }
  return store;
}

}  // namespace sdcap
