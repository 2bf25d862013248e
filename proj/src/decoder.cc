#include "sdcap/decoder.h"

#include "sdcap/error.h"

namespace sdcap {

void check_distribution(const Vec& dist, std::size_t vocab_size) {
  if (dist.size() != vocab_size) {
    throw ContractError("step function returned " + std::to_string(dist.size()) +
                        " probabilities, expected " + std::to_string(vocab_size));
  }
  double sum = 0.0;
  for (double p : dist) {
    if (!std::isfinite(p) || p < 0.0) {
      throw ContractError("step function returned a negative or non-finite probability");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw ContractError("step function returned a vector summing to " + std::to_string(sum));
  }
}

std::vector<TokenId> emit_order(std::size_t vocab_size) {
  if (vocab_size <= static_cast<std::size_t>(kNumReserved)) {
    throw ContractError("vocabulary has no emittable words");
  }
  std::vector<TokenId> order;
  order.reserve(vocab_size - 3);
  for (std::size_t t = kNumReserved; t < vocab_size; ++t) order.push_back(static_cast<TokenId>(t));
  order.push_back(kEnd);
  return order;
}

}  // namespace sdcap
