// Reference implementations used only by the tests. They share no code with
// the library: plain vectors, Gaussian elimination in long double, direct
// formulas.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using Real = long double;
using Matrix = std::vector<std::vector<Real>>;
using Vector = std::vector<double>;
using RVector = std::vector<Real>;
using Points = std::vector<Vector>;

inline Real kernel(const std::string& family, Real ell, Real s2, const Vector& a,
                   const Vector& b) {
  Real sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (Real(a[i]) - b[i]) * (Real(a[i]) - b[i]);
  const Real r = std::sqrt(sq) / ell;
  const Real s3 = std::sqrt(Real(3)), s5 = std::sqrt(Real(5));
  if (family == "matern12") return s2 * std::exp(-r);
  if (family == "matern32") return s2 * (1 + s3 * r) * std::exp(-s3 * r);
  if (family == "matern52") return s2 * (1 + s5 * r + 5 * r * r / 3) * std::exp(-s5 * r);
  return s2 * std::exp(-r * r / 2);
}

struct Lu {
  Matrix a;
  std::vector<std::size_t> perm;
  int sign = 1;
};

// Doolittle LU with partial pivoting.
inline Lu lu(Matrix a) {
  const std::size_t n = a.size();
  Lu out;
  out.perm.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.perm[i] = i;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    if (p != c) {
      std::swap(a[p], a[c]);
      std::swap(out.perm[p], out.perm[c]);
      out.sign = -out.sign;
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      a[r][c] /= a[c][c];
      for (std::size_t k = c + 1; k < n; ++k) a[r][k] -= a[r][c] * a[c][k];
    }
  }
  out.a = std::move(a);
  return out;
}

inline RVector solve(const Lu& f, const RVector& b) {
  const std::size_t n = f.a.size();
  RVector x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = b[f.perm[i]];
    for (std::size_t k = 0; k < i; ++k) x[i] -= f.a[i][k] * x[k];
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) x[i] -= f.a[i][k] * x[k];
    x[i] /= f.a[i][i];
  }
  return x;
}

inline Real log_abs_det(const Lu& f) {
  Real s = 0.0;
  for (std::size_t i = 0; i < f.a.size(); ++i) s += std::log(std::abs(f.a[i][i]));
  return s;
}

inline Real dot(const RVector& a, const RVector& b) {
  Real s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct Gp {
  std::string family;
  double ell, s2, noise;
  Points X;
  Vector y;  // raw responses
  Real mean = 0.0, sd = 1.0;
  RVector ys;
  Lu f;

  Gp(std::string fam, double l, double s, double nz, Points x, Vector yy, double jitter = 0.0)
      : family(std::move(fam)), ell(l), s2(s), noise(nz), X(std::move(x)), y(std::move(yy)) {
    const std::size_t n = y.size();
    for (double v : y) mean += v;
    mean /= static_cast<Real>(n);
    if (n >= 2) {
      Real ss = 0.0;
      for (double v : y) ss += (v - mean) * (v - mean);
      const Real s_hat = std::sqrt(ss / static_cast<Real>(n - 1));
      if (s_hat > 1e-12L * std::max(Real(1), std::abs(mean))) sd = s_hat;
    }
    for (double v : y) ys.push_back((v - mean) / sd);
    Matrix K(n, RVector(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        K[i][j] = kernel(family, ell, s2, X[i], X[j]) + (i == j ? noise + jitter : 0.0);
    f = lu(K);
  }

  double log_likelihood() const {
    const RVector a = solve(f, ys);
    const Real n = static_cast<Real>(ys.size());
    return static_cast<double>(-dot(ys, a) / 2 - log_abs_det(f) / 2 -
                               n * std::log(2 * std::numbers::pi_v<Real>) / 2);
  }

  // Standardized responses rounded to double, as the library receives them.
  Vector standardized() const { return {ys.begin(), ys.end()}; }

  // Mean in raw units and variance of the latent function in raw units.
  std::pair<double, double> predict(const Vector& x) const {
    RVector k;
    for (const auto& xi : X) k.push_back(kernel(family, ell, s2, xi, x));
    const RVector a = solve(f, ys);
    const RVector b = solve(f, k);
    const Real m = mean + sd * dot(k, a);
    const Real v = sd * sd * std::max(Real(0), s2 - dot(k, b));
    return {static_cast<double>(m), static_cast<double>(v)};
  }
};

struct MonteCarlo {
  double estimate;
  double standard_error;
};

// E[max(Y - incumbent, 0)] for Y ~ N(mean, sd^2), maximize direction.
inline MonteCarlo expected_improvement(double mean, double sd, double incumbent, int draws,
                                       std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double g = std::max(mean + sd * z(gen) - incumbent, 0.0);
    sum += g;
    sum_sq += g * g;
  }
  const double n = static_cast<double>(draws);
  const double m = sum / n;
  const double var = (sum_sq / n - m * m) * n / (n - 1.0);
  return {m, std::sqrt(var / n)};
}

// Piston cycle time written out step by step from the textbook formula.
inline double piston(double M, double S, double V0, double k, double P0, double Ta, double T0) {
  const double A = P0 * S + 19.62 * M - k * V0 / S;
  const double inner = A * A + 4.0 * k * (P0 * V0 / T0) * Ta;
  const double V = S / (2.0 * k) * (std::sqrt(inner) - A);
  const double denom = k + S * S * (P0 * V0 / T0) * (Ta / (V * V));
  return 2.0 * std::numbers::pi * std::sqrt(M / denom);
}

}  // namespace oracle
