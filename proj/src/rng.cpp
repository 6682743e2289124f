#include "cgp/rng.hpp"

#include <cmath>
#include <numbers>

namespace cgp {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n) {
  const auto wide = static_cast<unsigned __int128>(engine_()) * n;
  return static_cast<std::size_t>(wide >> 64);
}

Rng Rng::derive(std::uint64_t tag) const {
  return Rng(splitmix64(seed_ ^ splitmix64(tag ^ 0x5851f42d4c957f2dULL)));
}

Rng Rng::derive(std::string_view tag) const {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return derive(h);
}

}  // namespace cgp
