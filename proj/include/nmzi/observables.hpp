#pragma once

#include "nmzi/fock.hpp"

#include <algorithm>
#include <cstdio>
#include <optional>
#include <string>

// Path A figures of merit: reduced density matrix, photon-number
// probabilities, second-order correlation, fidelity and purity.

namespace nmzi {

// Reduced density matrix of Path A in the photon-number basis.
struct ModeADensity {
  Eigen::MatrixXcd rho;

  int dim() const { return static_cast<int>(rho.rows()); }
};

// rho[p][p'] = sum_q psi(p, q) conj(psi(p', q)); the sum over the Path B
// photon number q runs inside the sector structure.
inline ModeADensity reduce_to_mode_a(const TwoModeState& s) {
  const int d = s.n_max() + 1;
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(d, d);
  for (int q = 0; q < d; ++q) {
    for (int p = 0; p + q < d; ++p) {
      const cplx ap = s.sector(p + q)(p);
      if (ap == cplx{}) continue;
      for (int pp = 0; pp + q < d; ++pp) rho(p, pp) += ap * std::conj(s.sector(pp + q)(pp));
    }
  }
  return {rho};
}

// Diagonal of rho.  Entries in [-1e-10, 0) are numerical noise and clip to
// zero; anything more negative indicates a broken density matrix.
inline Eigen::VectorXd photon_probabilities(const ModeADensity& rho) {
  const int d = rho.dim();
  Eigen::VectorXd p(d);
  for (int k = 0; k < d; ++k) {
    const double v = rho.rho(k, k).real();
    if (v < -1e-10)
      throw std::runtime_error("photon_probabilities: diagonal entry " + std::to_string(k) +
                               " is " + std::to_string(v));
    p(k) = std::max(v, 0.0);
  }
  return p;
}

// Same probabilities straight from the state, skipping the density matrix.
inline Eigen::VectorXd photon_probabilities(const TwoModeState& s) {
  const int d = s.n_max() + 1;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(d);
  for (int n = 0; n <= s.n_max(); ++n)
    for (int k = 0; k <= n; ++k) p(k) += std::norm(s.sector(n)(k));
  return p;
}

// g2 = sum_{p>=2} p(p-1) P_p / (sum_{p>=1} p P_p)^2 with both moments taken
// against the total weight, so a common rescaling of the distribution drops
// out.  Zero mean photon number leaves it undefined, reported as nullopt
// rather than 0.
inline std::optional<double> g2(const Eigen::VectorXd& p) {
  double total = 0.0, mean = 0.0, pairs = 0.0;
  for (int k = 0; k < p.size(); ++k) {
    total += p(k);
    mean += k * p(k);
    pairs += static_cast<double>(k) * (k - 1) * p(k);
  }
  if (mean <= 0.0 || total <= 0.0) return std::nullopt;
  return (pairs / total) / ((mean / total) * (mean / total));
}

// <target| rho |target>; the target must be normalized.
inline double fidelity(const ModeADensity& rho, const Eigen::VectorXcd& target) {
  if (target.size() > rho.dim())
    throw std::invalid_argument("fidelity: target longer than the density matrix dimension");
  if (std::abs(target.norm() - 1.0) > 1e-8)
    throw std::invalid_argument("fidelity: target state is not normalized");
  const auto sub = rho.rho.topLeftCorner(target.size(), target.size());
  return (target.adjoint() * sub * target)(0).real();
}

// Same overlap straight from the joint state:
// F = sum_q | sum_p conj(t_p) psi(p, q) |^2.
inline double fidelity_to_target(const TwoModeState& s, const Eigen::VectorXcd& target) {
  if (std::abs(target.norm() - 1.0) > 1e-8)
    throw std::invalid_argument("fidelity_to_target: target state is not normalized");
  const int d = s.n_max() + 1;
  double f = 0.0;
  for (int q = 0; q < d; ++q) {
    cplx v{};
    for (int p = 0; p < target.size() && p + q < d; ++p)
      v += std::conj(target(p)) * s.sector(p + q)(p);
    f += std::norm(v);
  }
  return f;
}

// Tr(rho^2); equals the squared Frobenius norm for Hermitian rho.
inline double purity(const ModeADensity& rho) { return rho.rho.squaredNorm(); }

// Flat record of the Path A observables.  Field order is fixed:
// n_max, P_0..P_4, P_rest, g2, fidelity, purity.
struct ObservableReport {
  int n_max = 0;
  Eigen::VectorXd p;
  std::optional<double> g2;
  std::optional<double> fidelity;  // set when a target was supplied
  double purity = 0.0;

  double p_at(int k) const { return k < p.size() ? p(k) : 0.0; }

  double tail(int from) const {
    double s = 0.0;
    for (int k = from; k < p.size(); ++k) s += p(k);
    return s;
  }
};

inline ObservableReport make_report(const TwoModeState& s, const Eigen::VectorXcd* target = nullptr) {
  const ModeADensity rho = reduce_to_mode_a(s);
  ObservableReport r;
  r.n_max = s.n_max();
  r.p = photon_probabilities(rho);
  r.g2 = g2(r.p);
  r.purity = purity(rho);
  if (target) r.fidelity = fidelity(rho, *target);
  return r;
}

namespace detail {

inline std::string fmt12(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

inline std::string fmt12_opt(const std::optional<double>& x) {
  return x ? fmt12(*x) : std::string("undefined");
}

}  // namespace detail

inline std::string report_csv_header() {
  return "n_max,p0,p1,p2,p3,p4,p_rest,g2,fidelity,purity";
}

inline std::string report_csv_row(const ObservableReport& r) {
  std::string out = std::to_string(r.n_max);
  for (int k = 0; k <= 4; ++k) out += "," + detail::fmt12(r.p_at(k));
  out += "," + detail::fmt12(r.tail(5));
  out += "," + detail::fmt12_opt(r.g2);
  out += "," + detail::fmt12_opt(r.fidelity);
  out += "," + detail::fmt12(r.purity);
  return out;
}

}  // namespace nmzi
