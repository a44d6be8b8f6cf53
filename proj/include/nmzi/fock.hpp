#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Two bosonic modes (Path A, Path B) on a truncated Fock space.  Every
// circuit element conserves the total photon number n = n_A + n_B, so states
// and unitaries are stored as one independent block per total-n sector.
// Sector n has dimension n + 1 with basis |k>_A |n-k>_B, k = 0..n.

namespace nmzi {

using cplx = std::complex<double>;

inline constexpr double tail_tolerance = 1e-10;

// Poisson(mean) upper tail P[X > n_max], summed forward from the first
// excluded term.  Terms past the mean decay super-exponentially.
inline double poisson_tail(double mean, int n_max) {
  if (mean <= 0.0) return 0.0;
  const int first = n_max + 1;
  double term = std::exp(-mean + first * std::log(mean) - std::lgamma(first + 1.0));
  double sum = 0.0;
  for (int n = first; n < first + 512; ++n) {
    sum += term;
    term *= mean / (n + 1);
    if (term < sum * 1e-18 + 1e-300) break;
  }
  return sum;
}

struct FockCutoff {
  int n_max;

  explicit FockCutoff(int n) : n_max(n) {
    if (n < 1) throw std::invalid_argument("FockCutoff: n_max must be >= 1");
  }

  int sectors() const { return n_max + 1; }

  // Closed-form rule ceil(|alpha|^2 + 8 max(|alpha|, 1)) with floor 12,
  // then raised until the coherent tail deficit actually drops below tol.
  // The rule alone undershoots slightly for |alpha|^2 in roughly 1..4.
  static FockCutoff for_alpha(cplx alpha, double tol = tail_tolerance) {
    const double mean = std::norm(alpha);
    int n = std::max(12, static_cast<int>(std::ceil(mean + 8.0 * std::max(std::sqrt(mean), 1.0))));
    while (poisson_tail(mean, n) >= tol) ++n;
    return FockCutoff(n);
  }
};

// Pure two-mode state, one complex vector per total-photon-number sector.
class TwoModeState {
 public:
  explicit TwoModeState(const FockCutoff& cutoff) : sectors_(cutoff.sectors()) {
    for (int n = 0; n < cutoff.sectors(); ++n) sectors_[n] = Eigen::VectorXcd::Zero(n + 1);
  }

  int n_max() const { return static_cast<int>(sectors_.size()) - 1; }

  Eigen::VectorXcd& sector(int n) { return sectors_[n]; }
  const Eigen::VectorXcd& sector(int n) const { return sectors_[n]; }

  // Amplitude of |p>_A |q>_B; zero outside the cutoff.
  cplx amplitude(int p, int q) const {
    const int n = p + q;
    if (p < 0 || q < 0 || n > n_max()) return {};
    return sectors_[n](p);
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& v : sectors_) s += v.squaredNorm();
    return s;
  }
  double norm() const { return std::sqrt(squared_norm()); }

  void normalize() {
    const double n = norm();
    if (n <= 0.0) throw std::runtime_error("TwoModeState: cannot normalize the zero state");
    for (auto& v : sectors_) v /= n;
  }

 private:
  std::vector<Eigen::VectorXcd> sectors_;
};

// |vac>_A |alpha>_B truncated at the cutoff and renormalized.  Sector n holds
// c_n = e^{-|alpha|^2/2} alpha^n / sqrt(n!) at k = 0 (all photons in Path B).
// The pre-renormalization norm deficit is written to *deficit when given.
inline TwoModeState coherent_input(cplx alpha, const FockCutoff& cutoff, double* deficit = nullptr) {
  const double mean = std::norm(alpha);
  if (poisson_tail(mean, cutoff.n_max) >= tail_tolerance) {
    throw std::invalid_argument(
        "coherent_input: n_max=" + std::to_string(cutoff.n_max) + " too small for |alpha|^2=" +
        std::to_string(mean) + "; need n_max >= " + std::to_string(FockCutoff::for_alpha(alpha).n_max));
  }
  TwoModeState s(cutoff);
  cplx c = std::exp(-mean / 2.0);
  for (int n = 0; n <= cutoff.n_max; ++n) {
    s.sector(n)(0) = c;
    c *= alpha / std::sqrt(static_cast<double>(n + 1));
  }
  if (deficit) *deficit = std::max(0.0, 1.0 - s.squared_norm());
  s.normalize();
  return s;
}

// Block-diagonal unitary, one (n+1)x(n+1) block per sector.  Constructed as
// the identity; operations overwrite blocks.
class SectorUnitary {
 public:
  explicit SectorUnitary(const FockCutoff& cutoff) : blocks_(cutoff.sectors()) {
    for (int n = 0; n < cutoff.sectors(); ++n) blocks_[n] = Eigen::MatrixXcd::Identity(n + 1, n + 1);
  }

  int n_max() const { return static_cast<int>(blocks_.size()) - 1; }

  Eigen::MatrixXcd& block(int n) { return blocks_[n]; }
  const Eigen::MatrixXcd& block(int n) const { return blocks_[n]; }

  SectorUnitary adjoint() const {
    SectorUnitary u = *this;
    for (auto& b : u.blocks_) b = b.adjoint().eval();
    return u;
  }

  // max over blocks of || B^dag B - I ||_max
  double unitarity_defect() const {
    double worst = 0.0;
    for (const auto& b : blocks_) {
      const Eigen::MatrixXcd d = b.adjoint() * b - Eigen::MatrixXcd::Identity(b.rows(), b.cols());
      worst = std::max(worst, d.cwiseAbs().maxCoeff());
    }
    return worst;
  }

 private:
  std::vector<Eigen::MatrixXcd> blocks_;
};

// Blockwise product second * first; `first` acts on the state first.
inline SectorUnitary compose(const SectorUnitary& second, const SectorUnitary& first) {
  if (second.n_max() != first.n_max())
    throw std::invalid_argument("compose: cutoff mismatch");
  SectorUnitary u = second;
  for (int n = 0; n <= u.n_max(); ++n) u.block(n) = second.block(n) * first.block(n);
  return u;
}

// Matrix of a^dag b + a b^dag restricted to sector n: real symmetric
// tridiagonal with <k+1| . |k> = sqrt((k+1)(n-k)).
inline Eigen::MatrixXd bs_generator(int n) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n + 1, n + 1);
  for (int k = 0; k < n; ++k) {
    const double c = std::sqrt(static_cast<double>(k + 1) * (n - k));
    g(k + 1, k) = c;
    g(k, k + 1) = c;
  }
  return g;
}

// Eigen-decomposition of every sector's beam-splitter generator.  The
// generator does not depend on theta, so exp(i theta G) for any theta is a
// diagonal phase in the cached eigenbasis.
struct BsDiagonal {
  std::vector<Eigen::MatrixXd> vectors;
  std::vector<Eigen::VectorXd> values;

  explicit BsDiagonal(const FockCutoff& cutoff) {
    vectors.reserve(cutoff.sectors());
    values.reserve(cutoff.sectors());
    for (int n = 0; n <= cutoff.n_max; ++n) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(bs_generator(n));
      if (es.info() != Eigen::Success)
        throw std::runtime_error("BsDiagonal: eigensolver failed on sector " + std::to_string(n));
      vectors.push_back(es.eigenvectors());
      values.push_back(es.eigenvalues());
    }
  }
};

// U_BS(theta) = exp(i theta (a^dag b + a b^dag)), one block per sector.
inline SectorUnitary beam_splitter(double theta, const FockCutoff& cutoff,
                                   const BsDiagonal* diag = nullptr) {
  if (!std::isfinite(theta)) throw std::invalid_argument("beam_splitter: theta must be finite");
  std::optional<BsDiagonal> local;
  if (!diag) {
    local.emplace(cutoff);
    diag = &*local;
  }
  SectorUnitary u(cutoff);
  for (int n = 0; n <= cutoff.n_max; ++n) {
    const Eigen::MatrixXcd v = diag->vectors[n].cast<cplx>();
    Eigen::VectorXcd phases(n + 1);
    for (int k = 0; k <= n; ++k) phases(k) = std::polar(1.0, theta * diag->values[n](k));
    u.block(n) = v * phases.asDiagonal() * v.adjoint();
  }
  return u;
}

// Diagonal phase element: |k>_A |n-k>_B picks up
// exp(i (linear_phi k + kerr_phi k (k-1))).
inline SectorUnitary kerr_phase(double linear_phi, double kerr_phi, const FockCutoff& cutoff) {
  if (!std::isfinite(linear_phi) || !std::isfinite(kerr_phi))
    throw std::invalid_argument("kerr_phase: parameters must be finite");
  SectorUnitary u(cutoff);
  for (int n = 0; n <= cutoff.n_max; ++n) {
    for (int k = 0; k <= n; ++k)
      u.block(n)(k, k) = std::polar(1.0, linear_phi * k + kerr_phi * k * (k - 1.0));
  }
  return u;
}

// Sector-wise matrix-vector product.
inline TwoModeState apply(const SectorUnitary& u, const TwoModeState& s) {
  if (u.n_max() != s.n_max()) throw std::invalid_argument("apply: cutoff mismatch");
  TwoModeState out = s;
  for (int n = 0; n <= s.n_max(); ++n) out.sector(n) = u.block(n) * s.sector(n);
  return out;
}

}  // namespace nmzi
