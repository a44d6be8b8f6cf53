#include "nmzi/fock.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <unsupported/Eigen/MatrixFunctions>

using namespace nmzi;

namespace {

double block_diff(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

TwoModeState random_state(std::mt19937_64& rng, const FockCutoff& cutoff) {
  TwoModeState s(cutoff);
  std::normal_distribution<double> g;
  for (int n = 0; n <= cutoff.n_max; ++n)
    for (int k = 0; k <= n; ++k) s.sector(n)(k) = cplx(g(rng), g(rng));
  s.normalize();
  return s;
}

}  // namespace

TEST_CASE("coherent input: vacuum at alpha = 0", "[fock]") {
  const FockCutoff cut(12);
  const TwoModeState s = coherent_input(0.0, cut);
  CHECK(std::abs(s.sector(0)(0) - 1.0) < 1e-15);
  for (int n = 1; n <= cut.n_max; ++n) CHECK(s.sector(n).norm() == 0.0);
}

TEST_CASE("coherent input: truncation deficit at alpha = 0.1, n_max = 10", "[fock]") {
  // independent oracle: partial Poisson sums with explicit factorials
  double fact = 1.0, partial = 0.0;
  const double mean = 0.01;
  for (int n = 0; n <= 10; ++n) {
    if (n > 0) fact *= n;
    partial += std::exp(-mean) * std::pow(mean, n) / fact;
  }
  const double expected_deficit = 1.0 - partial;
  CHECK(expected_deficit < 1e-12);

  double deficit = -1.0;
  coherent_input(0.1, FockCutoff(10), &deficit);
  CHECK(deficit < 1e-12);
  CHECK(deficit == Catch::Approx(expected_deficit).margin(1e-16));
}

TEST_CASE("coherent input: sector weights follow the Poisson ratio", "[fock]") {
  const TwoModeState s = coherent_input(0.1, FockCutoff(12));
  const double ratio = std::norm(s.sector(1)(0)) / std::norm(s.sector(0)(0));
  CHECK(ratio == Catch::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("coherent input: all photons sit in Path B", "[fock]") {
  const TwoModeState s = coherent_input(cplx(0.3, 0.2), FockCutoff(12));
  for (int n = 1; n <= s.n_max(); ++n)
    for (int k = 1; k <= n; ++k) CHECK(s.sector(n)(k) == cplx{});
  CHECK(s.norm() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("cutoff rule meets the tail tolerance and the floor", "[fock]") {
  for (double a2 : {0.0, 0.01, 0.5, 1.0, 1.5, 2.5, 4.0, 10.0}) {
    const FockCutoff cut = FockCutoff::for_alpha(std::sqrt(a2));
    CHECK(cut.n_max >= 12);
    CHECK(poisson_tail(a2, cut.n_max) < tail_tolerance);
  }
}

TEST_CASE("cutoff rejection names the required size", "[fock]") {
  try {
    coherent_input(2.0, FockCutoff(4));
    FAIL("expected a rejection");
  } catch (const std::invalid_argument& e) {
    const std::string needed = std::to_string(FockCutoff::for_alpha(2.0).n_max);
    CHECK(std::string(e.what()).find(needed) != std::string::npos);
  }
  CHECK_THROWS_AS(FockCutoff(0), std::invalid_argument);
}

TEST_CASE("beam splitter: identity at theta = 0", "[fock]") {
  const SectorUnitary u = beam_splitter(0.0, FockCutoff(6));
  for (int n = 0; n <= 6; ++n)
    CHECK(block_diff(u.block(n), Eigen::MatrixXcd::Identity(n + 1, n + 1)) < 1e-14);
}

TEST_CASE("beam splitter: pi/2 swaps a single photon with phase i", "[fock]") {
  const SectorUnitary u = beam_splitter(std::numbers::pi / 2, FockCutoff(4));
  TwoModeState s(FockCutoff(4));
  s.sector(1)(1) = 1.0;  // |1>_A |0>_B
  const TwoModeState out = apply(u, s);
  CHECK(std::abs(out.sector(1)(0) - cplx(0.0, 1.0)) < 1e-12);
  CHECK(std::abs(out.sector(1)(1)) < 1e-12);
}

TEST_CASE("beam splitter sector blocks match a dense matrix exponential", "[fock]") {
  const FockCutoff cut(8);
  std::mt19937_64 rng(42);
  for (double theta : {0.3, -1.1, test::uniform(rng, -2.0, 2.0)}) {
    const SectorUnitary u = beam_splitter(theta, cut);
    for (int n : {1, 2, 5, 8}) {
      const Eigen::MatrixXcd g = bs_generator(n).cast<cplx>();
      const Eigen::MatrixXcd expected = (cplx(0.0, 1.0) * theta * g).exp();
      CHECK(block_diff(u.block(n), expected) < 1e-10);
    }
  }
}

TEST_CASE("beam splitter blocks compose additively in theta", "[fock]") {
  const FockCutoff cut(7);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 25; ++trial) {
    const double t1 = test::uniform(rng, -1.5, 1.5), t2 = test::uniform(rng, -1.5, 1.5);
    const SectorUnitary lhs = compose(beam_splitter(t1, cut), beam_splitter(t2, cut));
    const SectorUnitary rhs = beam_splitter(t1 + t2, cut);
    for (int n = 0; n <= cut.n_max; ++n) CHECK(block_diff(lhs.block(n), rhs.block(n)) < 1e-9);
  }
}

TEST_CASE("beam splitter blocks are unitary", "[fock]") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const SectorUnitary u = beam_splitter(test::uniform(rng, -3.0, 3.0), FockCutoff(9));
    CHECK(u.unitarity_defect() < 1e-10);
  }
}

TEST_CASE("phase element: stated entries", "[fock]") {
  const FockCutoff cut(4);
  const SectorUnitary u = kerr_phase(0.1, 0.1, cut);
  // k = 0 stays put
  CHECK(std::abs(u.block(2)(0, 0) - 1.0) < 1e-15);
  // the pair term annihilates a single photon
  CHECK(std::abs(u.block(1)(1, 1) - std::polar(1.0, 0.1)) < 1e-15);
  // k = 2 picks up 2 linear_phi + 2 kerr_phi
  CHECK(std::abs(u.block(2)(2, 2) - std::polar(1.0, 0.4)) < 1e-15);
}

TEST_CASE("phase element: diagonal, pure phases", "[fock]") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const SectorUnitary u =
        kerr_phase(test::uniform(rng, -3.0, 3.0), test::uniform(rng, -3.0, 3.0), FockCutoff(8));
    for (int n = 0; n <= 8; ++n) {
      for (int k = 0; k <= n; ++k) {
        CHECK(std::abs(std::abs(u.block(n)(k, k)) - 1.0) < 1e-12);
        for (int j = 0; j <= n; ++j)
          if (j != k) CHECK(u.block(n)(j, k) == cplx{});
      }
    }
  }
}

TEST_CASE("apply: identity returns the state unchanged", "[fock]") {
  const FockCutoff cut(8);
  std::mt19937_64 rng(4);
  const TwoModeState s = random_state(rng, cut);
  const TwoModeState out = apply(SectorUnitary(cut), s);
  for (int n = 0; n <= cut.n_max; ++n) CHECK((out.sector(n) - s.sector(n)).norm() == 0.0);
}

TEST_CASE("apply: norm preserved", "[fock]") {
  const FockCutoff cut(9);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const TwoModeState s = random_state(rng, cut);
    SectorUnitary u = beam_splitter(test::uniform(rng, -2.0, 2.0), cut);
    u = compose(kerr_phase(test::uniform(rng, -2.0, 2.0), test::uniform(rng, -2.0, 2.0), cut), u);
    CHECK(apply(u, s).norm() == Catch::Approx(1.0).margin(1e-10));
  }
}

TEST_CASE("apply: composition equals sequential application", "[fock]") {
  const FockCutoff cut(8);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const TwoModeState s = random_state(rng, cut);
    const SectorUnitary u1 = beam_splitter(test::uniform(rng, -2.0, 2.0), cut);
    const SectorUnitary u2 =
        kerr_phase(test::uniform(rng, -2.0, 2.0), test::uniform(rng, -2.0, 2.0), cut);
    const TwoModeState once = apply(compose(u2, u1), s);
    const TwoModeState twice = apply(u2, apply(u1, s));
    for (int n = 0; n <= cut.n_max; ++n) CHECK((once.sector(n) - twice.sector(n)).norm() < 1e-10);
  }
}

TEST_CASE("apply: cutoff mismatch rejected", "[fock]") {
  TwoModeState s(FockCutoff(5));
  s.sector(0)(0) = 1.0;
  CHECK_THROWS_AS(apply(SectorUnitary(FockCutoff(6)), s), std::invalid_argument);
}

TEST_CASE("sector structure is preserved exactly", "[fock]") {
  const FockCutoff cut(8);
  TwoModeState s(cut);
  s.sector(3).setConstant(0.5);  // support on sector 3 only
  SectorUnitary u = beam_splitter(0.7, cut);
  u = compose(kerr_phase(0.2, 0.4, cut), u);
  const TwoModeState out = apply(u, s);
  for (int n = 0; n <= cut.n_max; ++n) {
    if (n == 3) continue;
    for (int k = 0; k <= n; ++k) CHECK(out.sector(n)(k) == cplx{});
  }
  CHECK(out.sector(3).norm() > 0.0);
}
