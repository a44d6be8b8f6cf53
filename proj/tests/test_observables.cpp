#include "nmzi/observables.hpp"
#include "nmzi/circuit.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace nmzi;

namespace {

TwoModeState random_state(std::mt19937_64& rng, const FockCutoff& cutoff) {
  TwoModeState s(cutoff);
  std::normal_distribution<double> g;
  for (int n = 0; n <= cutoff.n_max; ++n)
    for (int k = 0; k <= n; ++k) s.sector(n)(k) = cplx(g(rng), g(rng));
  s.normalize();
  return s;
}

}  // namespace

TEST_CASE("reduction: one photon in Path A gives |1><1|", "[observables]") {
  TwoModeState s(FockCutoff(4));
  s.sector(1)(1) = 1.0;
  const ModeADensity rho = reduce_to_mode_a(s);
  CHECK(std::abs(rho.rho(1, 1) - 1.0) < 1e-15);
  CHECK(rho.rho.cwiseAbs().sum() == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("reduction: coherent input before any circuit is vacuum in A", "[observables]") {
  const ModeADensity rho = reduce_to_mode_a(coherent_input(0.8, FockCutoff::for_alpha(0.8)));
  CHECK(std::abs(rho.rho(0, 0) - 1.0) < 1e-12);
  CHECK(purity(rho) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("reduction: balanced one-photon split is maximally mixed", "[observables]") {
  TwoModeState s(FockCutoff(4));
  s.sector(1)(0) = 1.0 / std::sqrt(2.0);
  s.sector(1)(1) = 1.0 / std::sqrt(2.0);
  const ModeADensity rho = reduce_to_mode_a(s);
  // hand 2x2 partial trace: diag(1/2, 1/2), no coherence between 0 and 1
  CHECK(rho.rho(0, 0).real() == Catch::Approx(0.5).margin(1e-15));
  CHECK(rho.rho(1, 1).real() == Catch::Approx(0.5).margin(1e-15));
  CHECK(std::abs(rho.rho(0, 1)) < 1e-15);
  CHECK(purity(rho) == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("reduction: density matrix is Hermitian, unit trace, positive", "[observables]") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const ModeADensity rho = reduce_to_mode_a(random_state(rng, FockCutoff(8)));
    CHECK((rho.rho - rho.rho.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(rho.rho.trace().real() == Catch::Approx(1.0).margin(1e-9));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho.rho);
    CHECK(es.eigenvalues().minCoeff() > -1e-10);
  }
}

TEST_CASE("reduction: matches the dense partial trace", "[observables]") {
  std::mt19937_64 rng(22);
  const int n_max = 7;
  const test::DenseSim dense(n_max);
  for (int trial = 0; trial < 10; ++trial) {
    const CircuitSpec spec = test::random_spec(rng, 3);
    const cplx alpha = test::uniform(rng, 0.0, 0.3);
    const TwoModeState mine = run(spec, alpha, FockCutoff(n_max));
    const Eigen::MatrixXcd expected = dense.reduce_a(dense.run(spec, alpha));
    CHECK((reduce_to_mode_a(mine).rho - expected).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("probabilities: clipping separates noise from bugs", "[observables]") {
  ModeADensity rho{Eigen::MatrixXcd::Zero(3, 3)};
  rho.rho(0, 0) = 1.0;
  rho.rho(1, 1) = -5e-11;  // numerical noise
  CHECK(photon_probabilities(rho)(1) == 0.0);
  rho.rho(1, 1) = -1e-8;  // broken
  CHECK_THROWS_AS(photon_probabilities(rho), std::runtime_error);
}

TEST_CASE("probabilities: state fast path equals the density route", "[observables]") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const TwoModeState s = random_state(rng, FockCutoff(8));
    const Eigen::VectorXd a = photon_probabilities(s);
    const Eigen::VectorXd b = photon_probabilities(reduce_to_mode_a(s));
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("g2: canonical values", "[observables]") {
  Eigen::VectorXd single = Eigen::VectorXd::Zero(5);
  single(1) = 1.0;
  CHECK(*g2(single) == 0.0);

  // Poisson weights give exactly 1
  Eigen::VectorXd poisson(25);
  double term = std::exp(-0.7);
  for (int n = 0; n < 25; ++n) {
    poisson(n) = term;
    term *= 0.7 / (n + 1);
  }
  CHECK(*g2(poisson) == Catch::Approx(1.0).margin(1e-8));

  Eigen::VectorXd vacuum = Eigen::VectorXd::Zero(5);
  vacuum(0) = 1.0;
  CHECK_FALSE(g2(vacuum).has_value());
}

TEST_CASE("g2: invariant under rescaling the distribution", "[observables]") {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd p(8);
    for (int i = 0; i < 8; ++i) p(i) = test::uniform(rng, 0.0, 1.0);
    const double c = test::uniform(rng, 0.1, 7.0);
    CHECK(*g2(p) == Catch::Approx(*g2(Eigen::VectorXd(c * p))).epsilon(1e-12));
  }
}

TEST_CASE("fidelity: Fock target reads off that probability", "[observables]") {
  std::mt19937_64 rng(25);
  const TwoModeState s = random_state(rng, FockCutoff(6));
  const ModeADensity rho = reduce_to_mode_a(s);
  for (int n = 0; n <= 3; ++n) {
    Eigen::VectorXcd target = Eigen::VectorXcd::Zero(n + 1);
    target(n) = 1.0;
    CHECK(fidelity(rho, target) ==
          Catch::Approx(photon_probabilities(rho)(n)).margin(1e-12));
  }
}

TEST_CASE("fidelity: pure state against itself is 1", "[observables]") {
  TwoModeState s(FockCutoff(4));
  s.sector(1)(1) = std::sqrt(0.5);
  s.sector(0)(0) = std::sqrt(0.5);
  // product-with-vacuum-B superposition: rho_A = |t><t|
  Eigen::VectorXcd t(2);
  t << std::sqrt(0.5), std::sqrt(0.5);
  CHECK(fidelity(reduce_to_mode_a(s), t) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("fidelity: unnormalized target rejected", "[observables]") {
  TwoModeState s(FockCutoff(4));
  s.sector(0)(0) = 1.0;
  Eigen::VectorXcd bad(2);
  bad << 1.0, 1.0;
  CHECK_THROWS_AS(fidelity(reduce_to_mode_a(s), bad), std::invalid_argument);
}

TEST_CASE("fidelity: bounded on random inputs", "[observables]") {
  std::mt19937_64 rng(26);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 1000; ++trial) {
    const TwoModeState s = random_state(rng, FockCutoff(5));
    Eigen::VectorXcd t(3);
    for (int i = 0; i < 3; ++i) t(i) = cplx(g(rng), g(rng));
    t /= t.norm();
    const double f = fidelity(reduce_to_mode_a(s), t);
    CHECK(f >= -1e-10);
    CHECK(f <= 1.0 + 1e-10);
  }
}

TEST_CASE("fidelity: state fast path equals the density route", "[observables]") {
  std::mt19937_64 rng(27);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    const TwoModeState s = random_state(rng, FockCutoff(7));
    Eigen::VectorXcd t(4);
    for (int i = 0; i < 4; ++i) t(i) = cplx(g(rng), g(rng));
    t /= t.norm();
    CHECK(fidelity_to_target(s, t) ==
          Catch::Approx(fidelity(reduce_to_mode_a(s), t)).margin(1e-12));
  }
}

TEST_CASE("purity: bounds and the pure case", "[observables]") {
  std::mt19937_64 rng(28);
  for (int trial = 0; trial < 200; ++trial) {
    const ModeADensity rho = reduce_to_mode_a(random_state(rng, FockCutoff(6)));
    const double q = purity(rho);
    CHECK(q <= 1.0 + 1e-10);
    CHECK(q >= 1.0 / rho.dim() - 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho.rho);
    const double top = es.eigenvalues().maxCoeff();
    if (q > 1.0 - 1e-8) CHECK(top > 1.0 - 1e-6);
    if (top > 1.0 - 1e-10) CHECK(q > 1.0 - 1e-8);
  }
}

TEST_CASE("report: probabilities sum to the trace", "[observables]") {
  std::mt19937_64 rng(29);
  const TwoModeState s = random_state(rng, FockCutoff(8));
  const ObservableReport r = make_report(s);
  CHECK(r.p.sum() == Catch::Approx(reduce_to_mode_a(s).rho.trace().real()).margin(1e-10));
}

TEST_CASE("report: fixed CSV field order", "[observables]") {
  CHECK(report_csv_header() == "n_max,p0,p1,p2,p3,p4,p_rest,g2,fidelity,purity");
  TwoModeState s(FockCutoff(6));
  s.sector(0)(0) = 1.0;
  const ObservableReport r = make_report(s);
  CHECK(report_csv_row(r) == "6,1,0,0,0,0,0,undefined,undefined,1");
}
