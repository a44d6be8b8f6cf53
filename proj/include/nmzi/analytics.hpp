#pragma once

#include "nmzi/circuit.hpp"
#include "nmzi/observables.hpp"

#include <complex>
#include <numbers>
#include <optional>

// Closed-form small-alpha results and asymptotic expressions for the simple
// two-splitter interferometer and for ideal cascaded extraction.  These serve
// as oracles and optimizer seeds for the numerical machinery.

namespace nmzi {

// Single- and two-photon output amplitudes of the simple interferometer fed
// with |vac>_A |alpha>_B, in the gauge fixed by simple_nmzi():
//   mu10 = alpha c1 c2 (e^{-i phi} - eta) e^{-|alpha|^2/2}
//   mu20 = (alpha c1 c2)^2 / 2 * (eta^2 - 2 eta e^{-i phi} + e^{2i(kerr-phi)})
//          * e^{-|alpha|^2/2}
// with c_j = cos(theta_j) and eta = tan(theta1) tan(theta2).  These are
// coefficients of the monomials (a^dag)^p (b^dag)^q on the vacuum, so the
// photon probabilities are P_p = sum_q p! q! |mu_pq|^2 and the simulated
// normalized-basis amplitude of |p,q> is sqrt(p! q!) times mu_pq, up to a
// fixed gauge phase (-i)^{p+q}.  Both moduli and the ratio mu20 / mu10^2 are
// gauge-free.
struct MuAmplitudes {
  cplx mu10;
  cplx mu20;
};

inline MuAmplitudes mu_amplitudes(const SimpleNmziParams& p, cplx alpha) {
  const double c1 = std::cos(p.theta1), c2 = std::cos(p.theta2);
  const double eta = p.eta();
  const cplx gauss = std::exp(-std::norm(alpha) / 2.0);
  const cplx em_phi = std::polar(1.0, -p.linear_phi);
  const cplx front = alpha * c1 * c2;
  const cplx mu10 = front * (em_phi - eta) * gauss;
  const cplx bracket = eta * eta - 2.0 * eta * em_phi + std::polar(1.0, 2.0 * (p.kerr_phi - p.linear_phi));
  const cplx mu20 = 0.5 * front * front * bracket * gauss;
  return {mu10, mu20};
}

// Leading-order photon statistic |2 mu20 / mu10^2|^2, which reduces to
// |1 - (1 - e^{2i kerr}) / (1 - eta e^{i phi})^2|^2.  Undefined where mu10
// vanishes (eta e^{i phi} = 1).
inline std::optional<double> approx_g2(const SimpleNmziParams& p) {
  const cplx denom = 1.0 - p.eta() * std::polar(1.0, p.linear_phi);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const cplx val = 1.0 - (1.0 - std::polar(1.0, 2.0 * p.kerr_phi)) / (denom * denom);
  return std::norm(val);
}

enum class OptimalBranch { minus, plus };

struct OptimalCondition {
  double eta;
  double linear_phi;
};

// Parameters zeroing the two-photon amplitude: eta e^{i phi} equal to
// 1 -+ sqrt(1 - e^{2i kerr}) (principal square root).  Solvable for any
// kerr_phi that is not a multiple of pi; at multiples the two-photon and the
// one-photon amplitude vanish together and the condition degenerates.
inline OptimalCondition optimal_condition(double kerr_phi, OptimalBranch branch = OptimalBranch::minus) {
  if (std::abs(std::sin(kerr_phi)) < 1e-12)
    throw std::domain_error("optimal_condition: no solution for kerr_phi = 0 (mod pi)");
  const cplx root = std::sqrt(1.0 - std::polar(1.0, 2.0 * kerr_phi));
  const cplx w = branch == OptimalBranch::minus ? 1.0 - root : 1.0 + root;
  return {std::abs(w), std::arg(w)};
}

// Realization of the optimal condition with a balanced second splitter:
// theta1 = atan(eta), theta2 = pi/4.  The split of eta into the two angles
// only matters beyond leading order in alpha; this one reproduces the
// |alpha|^2 = 1 reference observables (P1 near 0.047, g2 near 0.48), where
// the equal split atan(sqrt(eta)) lands visibly lower in g2.
inline SimpleNmziParams optimal_simple_nmzi(double kerr_phi, OptimalBranch branch = OptimalBranch::minus) {
  const OptimalCondition c = optimal_condition(kerr_phi, branch);
  return {std::atan(c.eta), std::numbers::pi / 4.0, c.linear_phi, kerr_phi};
}

// Small-alpha single-photon yield (cos theta1 cos theta2)^2 |alpha|^2
// |1 - e^{2i kerr}| together with the coarse ceiling kerr |alpha|^2 / 2.
struct FiltrationBound {
  double fidelity_estimate;
  double bound;
};

inline FiltrationBound filtration_bound(double kerr_phi, cplx alpha, double theta1, double theta2) {
  const double cc = std::cos(theta1) * std::cos(theta2);
  const double mean = std::norm(alpha);
  const double f = cc * cc * mean * std::abs(1.0 - std::polar(1.0, 2.0 * kerr_phi));
  return {f, std::abs(kerr_phi) * mean / 2.0};
}

// Ceiling on n-photon extraction from |alpha>: a passive cascade cannot make
// n photons out of sectors holding fewer, so
// F <= 1 - sum_{m<n} e^{-|alpha|^2} |alpha|^{2m} / m!.
inline double extraction_asymptote(int n, cplx alpha) {
  if (n < 1) throw std::invalid_argument("extraction_asymptote: n must be >= 1");
  const double mean = std::norm(alpha);
  double term = std::exp(-mean), below = 0.0;
  for (int m = 0; m < n; ++m) {
    below += term;
    term *= mean / (m + 1);
  }
  return 1.0 - below;
}

// Fidelity of ideal (|0> + |1>)/sqrt(2) extraction when every sector splits
// evenly: exact = (1 + sum_n c_{n+1} c_n)/2 over the coherent coefficients,
// approximate = 1 - 1/(16 |alpha|^2) valid for |alpha|^2 >> 1.
struct IdealSuperpositionFidelity {
  double exact;
  double approximate;
};

inline IdealSuperpositionFidelity ideal_superposition_fidelity(cplx alpha) {
  const double a = std::abs(alpha);
  if (a <= 0.0) throw std::domain_error("ideal_superposition_fidelity: requires |alpha| > 0");
  const double a2 = a * a;
  // log-domain terms; a^{2n} e^{-a^2} / n! overflows well before the sum does
  double log_poly = -a2 + std::log(a);
  double sum = 0.0;
  for (int n = 0; n < 100000; ++n) {
    const double term = std::exp(log_poly) / std::sqrt(n + 1.0);
    sum += term;
    log_poly += std::log(a2) - std::log(n + 1.0);
    if (n > a2 && term < sum * 1e-18 + 1e-300) break;
  }
  return {0.5 * (1.0 + sum), 1.0 - 1.0 / (16.0 * a2)};
}

// exp(eps a^dag - conj(eps) a) on a dim-level truncation, via the
// eigen-decomposition of the Hermitian generator.
inline Eigen::MatrixXcd displacement_operator(cplx eps, int dim) {
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
  for (int k = 0; k + 1 < dim; ++k) {
    const double r = std::sqrt(k + 1.0);
    h(k + 1, k) = cplx(0.0, -1.0) * eps * r;
    h(k, k + 1) = cplx(0.0, 1.0) * std::conj(eps) * r;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  Eigen::VectorXcd phases(dim);
  for (int k = 0; k < dim; ++k) phases(k) = std::polar(1.0, es.eigenvalues()(k));
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

// Infidelity between the Path A state after one weak splitter against a
// strong coherent Path B, and the displaced probe D(i alpha theta) |probe>.
// Scales as O(eps^2 / alpha^2) with eps = alpha * theta; the i matches the
// splitter generator convention.
inline double displacement_approx_error(double theta, cplx alpha, const Eigen::VectorXcd& probe,
                                        const FockCutoff& cutoff) {
  const int pd = static_cast<int>(probe.size());
  if (pd < 1 || probe.norm() <= 0.0)
    throw std::invalid_argument("displacement_approx_error: empty probe");
  // the comparison resolves errors down to ~1e-6, so the joint truncation
  // has to sit well below that, not at the coherent-input tolerance
  if (pd > cutoff.n_max || poisson_tail(std::norm(alpha), cutoff.n_max - (pd - 1)) >= 1e-8)
    throw std::invalid_argument("displacement_approx_error: cutoff too small for this probe and alpha");

  const Eigen::VectorXcd pr = probe / probe.norm();

  // probe (x) coherent, truncated by total photon number
  TwoModeState s(cutoff);
  const double mean = std::norm(alpha);
  std::vector<cplx> coh(cutoff.n_max + 1);
  cplx c = std::exp(-mean / 2.0);
  for (int m = 0; m <= cutoff.n_max; ++m) {
    coh[m] = c;
    c *= alpha / std::sqrt(m + 1.0);
  }
  for (int k = 0; k < pd; ++k)
    for (int m = 0; k + m <= cutoff.n_max; ++m) s.sector(k + m)(k) = pr(k) * coh[m];
  s.normalize();

  const TwoModeState out = apply(beam_splitter(theta, cutoff), s);
  const ModeADensity rho = reduce_to_mode_a(out);

  Eigen::VectorXcd padded = Eigen::VectorXcd::Zero(cutoff.n_max + 1);
  padded.head(pd) = pr;
  Eigen::VectorXcd target = displacement_operator(cplx(0.0, 1.0) * alpha * theta, cutoff.n_max + 1) * padded;
  target /= target.norm();

  return 1.0 - fidelity(rho, target);
}

}  // namespace nmzi
