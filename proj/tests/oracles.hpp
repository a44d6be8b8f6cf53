#pragma once

#include "nmzi/circuit.hpp"
#include "nmzi/observables.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <random>

// Test-only reference implementations, deliberately independent of the
// sector-block code paths:
//  * a dense full-space simulator over the product basis |k>_A |m>_B with a
//    per-mode cutoff, exponentiating generators with the Pade routine from
//    Eigen's MatrixFunctions module;
//  * helpers for random circuits and comparisons.
//
// Intermediate-amplitude bookkeeping for the two-splitter interferometer:
// write the state after the first splitter and the phase stage as
// sum_{n,m} lambda_{n,m} |n>_A |m>_B.  For a coherent input these lambda are
// the product-coherent amplitudes times the per-k phases, and the final
// output amplitudes are the second splitter's sector blocks applied to them.
// The closed forms in analytics.hpp are exactly that composition restricted
// to the one- and two-photon sectors; the dense simulator below reproduces
// the same composition with no sector factorization at all.

namespace nmzi::test {

inline Eigen::MatrixXcd lowering(int dim) {
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(dim, dim);
  for (int k = 1; k < dim; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
  return a;
}

inline Eigen::MatrixXcd kron(const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) {
  Eigen::MatrixXcd out(x.rows() * y.rows(), x.cols() * y.cols());
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) out.block(i * y.rows(), j * y.cols(), y.rows(), y.cols()) = x(i, j) * y;
  return out;
}

// Dense two-mode simulator; index (k, m) -> k * dim + m with k the Path A
// photon number.
struct DenseSim {
  int dim;
  Eigen::MatrixXcd a, b;

  explicit DenseSim(int n_max) : dim(n_max + 1) {
    const Eigen::MatrixXcd one = Eigen::MatrixXcd::Identity(dim, dim);
    a = kron(lowering(dim), one);
    b = kron(one, lowering(dim));
  }

  Eigen::VectorXcd coherent_vacuum_input(cplx alpha) const {
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(dim * dim);
    cplx c = std::exp(-std::norm(alpha) / 2.0);
    for (int m = 0; m < dim; ++m) {
      psi(m) = c;
      c *= alpha / std::sqrt(m + 1.0);
    }
    psi /= psi.norm();
    return psi;
  }

  Eigen::MatrixXcd beam_splitter(double theta) const {
    const Eigen::MatrixXcd g = a.adjoint() * b + a * b.adjoint();
    return (cplx(0.0, 1.0) * theta * g).exp();
  }

  Eigen::MatrixXcd kerr(double linear_phi, double kerr_phi) const {
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(dim * dim, dim * dim);
    for (int k = 0; k < dim; ++k)
      for (int m = 0; m < dim; ++m)
        u(k * dim + m, k * dim + m) = std::polar(1.0, linear_phi * k + kerr_phi * k * (k - 1.0));
    return u;
  }

  Eigen::MatrixXcd element(const ElementParams& p) const {
    return kerr(p.linear_phi, p.kerr_phi) * beam_splitter(p.theta);
  }

  Eigen::VectorXcd run(const CircuitSpec& spec, cplx alpha) const {
    Eigen::VectorXcd psi = coherent_vacuum_input(alpha);
    for (const auto& el : spec.elements) psi = element(el) * psi;
    return psi;
  }

  cplx amplitude(const Eigen::VectorXcd& psi, int p, int q) const { return psi(p * dim + q); }

  Eigen::MatrixXcd reduce_a(const Eigen::VectorXcd& psi) const {
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(dim, dim);
    for (int k = 0; k < dim; ++k)
      for (int kk = 0; kk < dim; ++kk)
        for (int m = 0; m < dim; ++m) rho(k, kk) += psi(k * dim + m) * std::conj(psi(kk * dim + m));
    return rho;
  }
};

// max |amplitude difference| over the states with total photons <= n_max
inline double max_amplitude_diff(const TwoModeState& s, const DenseSim& dense,
                                 const Eigen::VectorXcd& psi) {
  double worst = 0.0;
  for (int n = 0; n <= s.n_max(); ++n)
    for (int k = 0; k <= n; ++k)
      worst = std::max(worst, std::abs(s.sector(n)(k) - dense.amplitude(psi, k, n - k)));
  return worst;
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline CircuitSpec random_spec(std::mt19937_64& g, int n_elements, double theta_max = 1.2,
                               double phi_max = 3.0, double kerr_max = 1.0) {
  CircuitSpec spec;
  for (int i = 0; i < n_elements; ++i)
    spec.elements.push_back({uniform(g, -theta_max, theta_max), uniform(g, -phi_max, phi_max),
                             uniform(g, -kerr_max, kerr_max)});
  return spec;
}

}  // namespace nmzi::test
