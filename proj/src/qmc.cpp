#include "cgp/qmc.hpp"

#include <array>
#include <cmath>

#include "cgp/errors.hpp"

namespace cgp {
namespace {

constexpr std::array<unsigned, 64> kPrimes = {
    2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,  47,  53,
    59,  61,  67,  71,  73,  79,  83,  89,  97,  101, 103, 107, 109, 113, 127, 131,
    137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223,
    227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307, 311};

}  // namespace

double radical_inverse(std::uint64_t index, unsigned base) {
  const double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

Eigen::MatrixXd rotated_halton(std::size_t n, std::size_t d, Rng& rng) {
  if (d > kPrimes.size()) throw DomainError("quasi-random pool supports at most 64 dimensions");
  Eigen::VectorXd shift(d);
  for (std::size_t j = 0; j < d; ++j) shift[j] = rng.uniform();
  Eigen::MatrixXd pts(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double v = radical_inverse(i + 1, kPrimes[j]) + shift[j];
      pts(i, j) = v - std::floor(v);
    }
  }
  return pts;
}

}  // namespace cgp
