#pragma once

#include <cstddef>
#include <span>

namespace pmc {

// Index X_k' beta for the k-th product row of a product-major J x D block.
// Every consumer of indexes (criterion, oracle probabilities, simulation) goes
// through this one routine so that equal inputs give bitwise-equal indexes.
inline double product_index(std::span<const double> block, std::size_t k, std::span<const double> beta) {
  const std::size_t d = beta.size();
  const double* x = block.data() + k * d;
  double acc = 0.0;
  for (std::size_t q = 0; q < d; ++q) acc += x[q] * beta[q];
  return acc;
}

}  // namespace pmc
