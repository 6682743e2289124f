#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "cgp/rng.hpp"

namespace cgp {

/// Van der Corput radical inverse of `index` in `base`.
double radical_inverse(std::uint64_t index, unsigned base);

/// `n` points of the Halton sequence in [0,1)^d under a random
/// Cranley-Patterson rotation drawn from `rng` (one uniform per dimension).
/// Rows are points. Supports d <= 64.
Eigen::MatrixXd rotated_halton(std::size_t n, std::size_t d, Rng& rng);

}  // namespace cgp
