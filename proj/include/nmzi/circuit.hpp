#pragma once

#include "nmzi/fock.hpp"

#include <cstdio>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

// Cascades of identical two-port elements.  One element is a beam splitter
// followed by a linear phase shifter and a Kerr medium in Path A; element
// l = 1 acts on the state first.

namespace nmzi {

struct ElementParams {
  double theta = 0.0;       // beam splitter mixing angle, radians
  double linear_phi = 0.0;  // Path A linear phase, radians
  double kerr_phi = 0.0;    // Kerr coefficient, radians
};

struct CircuitSpec {
  std::vector<ElementParams> elements;

  int size() const { return static_cast<int>(elements.size()); }
};

// phase stage composed after the splitter stage
inline SectorUnitary element_unitary(const ElementParams& p, const FockCutoff& cutoff,
                                     const BsDiagonal* diag = nullptr) {
  return compose(kerr_phase(p.linear_phi, p.kerr_phi, cutoff), beam_splitter(p.theta, cutoff, diag));
}

inline SectorUnitary cascade_unitary(const CircuitSpec& spec, const FockCutoff& cutoff) {
  if (spec.elements.empty()) throw std::invalid_argument("cascade_unitary: empty circuit");
  const BsDiagonal diag(cutoff);
  SectorUnitary u = element_unitary(spec.elements[0], cutoff, &diag);
  for (std::size_t l = 1; l < spec.elements.size(); ++l)
    u = compose(element_unitary(spec.elements[l], cutoff, &diag), u);
  return u;
}

// Reusable evolution engine.  Caches the splitter eigenbasis for its cutoff,
// so applying one element costs two dense mat-vecs per sector instead of a
// fresh eigen-decomposition.  Immutable after construction; safe to share
// between threads.
class Evolver {
 public:
  explicit Evolver(const FockCutoff& cutoff) : cutoff_(cutoff), diag_(cutoff) {
    basis_.reserve(cutoff.sectors());
    for (int n = 0; n <= cutoff.n_max; ++n) basis_.push_back(diag_.vectors[n].cast<cplx>());
  }

  const FockCutoff& cutoff() const { return cutoff_; }
  const BsDiagonal& bs_diagonal() const { return diag_; }

  void apply_in_place(const CircuitSpec& spec, TwoModeState& s) const {
    if (s.n_max() != cutoff_.n_max) throw std::invalid_argument("Evolver: cutoff mismatch");
    Eigen::VectorXcd tmp(cutoff_.n_max + 1);
    for (const auto& el : spec.elements) {
      for (int n = 0; n <= cutoff_.n_max; ++n) {
        auto head = tmp.head(n + 1);
        auto& x = s.sector(n);
        head.noalias() = basis_[n].adjoint() * x;
        for (int k = 0; k <= n; ++k) head(k) *= std::polar(1.0, el.theta * diag_.values[n](k));
        x.noalias() = basis_[n] * head;
        for (int k = 0; k <= n; ++k)
          x(k) *= std::polar(1.0, el.linear_phi * k + el.kerr_phi * k * (k - 1.0));
      }
    }
  }

  TwoModeState run(const CircuitSpec& spec, cplx alpha, double* deficit = nullptr) const {
    TwoModeState s = coherent_input(alpha, cutoff_, deficit);
    apply_in_place(spec, s);
    return s;
  }

 private:
  FockCutoff cutoff_;
  BsDiagonal diag_;
  std::vector<Eigen::MatrixXcd> basis_;
};

// Coherent input evolved through the cascade.
inline TwoModeState run(const CircuitSpec& spec, cplx alpha, const FockCutoff& cutoff) {
  if (spec.elements.empty()) throw std::invalid_argument("run: empty circuit");
  return Evolver(cutoff).run(spec, alpha);
}

// Two-splitter interferometer with the phase shifter and Kerr medium between
// the splitters.  theta1/theta2 are the interferometer angles used by the
// closed forms in analytics.hpp, with eta = tan(theta1) tan(theta2).
struct SimpleNmziParams {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double linear_phi = 0.0;
  double kerr_phi = 0.0;

  double eta() const { return std::tan(theta1) * std::tan(theta2); }
};

// Realize the interferometer as an N = 2 cascade (second element a bare
// splitter).  The element values fix the splitter gauge so the closed forms
// of analytics.hpp hold with eta = tan(theta1) tan(theta2):
//   * the first mixing angle is offset by -pi/2, which turns the generator
//     convention's sin(theta1) cross coupling into the cos(theta1) of the
//     closed forms;
//   * the arm phase enters negated, which places the two-photon dark point
//     at positive linear_phi for positive kerr_phi.
// Output amplitudes then equal the closed-form ones times a fixed phase
// (-i)^n per total-photon sector n (see the derivation notes in
// tests/oracles.hpp).
inline CircuitSpec simple_nmzi(const SimpleNmziParams& p) {
  CircuitSpec spec;
  spec.elements.push_back({p.theta1 - std::numbers::pi / 2.0, -p.linear_phi, p.kerr_phi});
  spec.elements.push_back({p.theta2, 0.0, 0.0});
  return spec;
}

// Element list whose cascade inverts the given one exactly.  An element is
// phase-after-splitter, so the inverted sequence pairs each negated phase
// stage with the next negated splitter, shifted by one slot; the result has
// N + 1 elements.
inline CircuitSpec inverse_spec(const CircuitSpec& spec) {
  const auto& e = spec.elements;
  if (e.empty()) throw std::invalid_argument("inverse_spec: empty circuit");
  const int n = static_cast<int>(e.size());
  CircuitSpec inv;
  inv.elements.push_back({0.0, -e[n - 1].linear_phi, -e[n - 1].kerr_phi});
  for (int j = n - 1; j >= 1; --j)
    inv.elements.push_back({-e[j].theta, -e[j - 1].linear_phi, -e[j - 1].kerr_phi});
  inv.elements.push_back({-e[0].theta, 0.0, 0.0});
  return inv;
}

// ---------------------------------------------------------------------------
// Flat text serialization.  One element per record, header carries the input
// amplitude and cutoff.  serialize(parse(x)) is byte-identical for files this
// writer produced; %.17g preserves doubles exactly.

inline constexpr int circuit_format_version = 1;

struct SavedCircuit {
  cplx alpha;
  int n_max = 12;
  CircuitSpec spec;
};

namespace detail {

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline double parse_double(const std::string& tok, int record, const char* field) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != tok.size())
    throw std::invalid_argument("circuit record " + std::to_string(record) + ": bad " + field +
                                " value '" + tok + "'");
  return v;
}

}  // namespace detail

inline std::string serialize_circuit(const SavedCircuit& doc) {
  std::string out = "nmzi-circuit v" + std::to_string(circuit_format_version) + "\n";
  out += "alpha " + detail::fmt17(doc.alpha.real()) + " " + detail::fmt17(doc.alpha.imag()) + "\n";
  out += "n_max " + std::to_string(doc.n_max) + "\n";
  out += "elements " + std::to_string(doc.spec.size()) + "\n";
  for (const auto& e : doc.spec.elements)
    out += detail::fmt17(e.theta) + " " + detail::fmt17(e.linear_phi) + " " +
           detail::fmt17(e.kerr_phi) + "\n";
  return out;
}

inline SavedCircuit parse_circuit(const std::string& text) {
  std::istringstream in(text);
  std::string line;

  auto next_line = [&](const char* what) {
    if (!std::getline(in, line))
      throw std::invalid_argument(std::string("circuit file: missing ") + what);
    return line;
  };

  next_line("header");
  if (line != "nmzi-circuit v" + std::to_string(circuit_format_version))
    throw std::invalid_argument("circuit file: unsupported header '" + line + "'");

  SavedCircuit doc;
  {
    std::istringstream ls(next_line("alpha line"));
    std::string key, re, im;
    ls >> key >> re >> im;
    if (key != "alpha" || re.empty() || im.empty())
      throw std::invalid_argument("circuit file: malformed alpha line");
    doc.alpha = {detail::parse_double(re, 0, "alpha re"), detail::parse_double(im, 0, "alpha im")};
  }
  {
    std::istringstream ls(next_line("n_max line"));
    std::string key, v;
    ls >> key >> v;
    if (key != "n_max" || v.empty()) throw std::invalid_argument("circuit file: malformed n_max line");
    doc.n_max = static_cast<int>(detail::parse_double(v, 0, "n_max"));
    if (doc.n_max < 1) throw std::invalid_argument("circuit file: n_max must be >= 1");
  }
  int count = 0;
  {
    std::istringstream ls(next_line("elements line"));
    std::string key, v;
    ls >> key >> v;
    if (key != "elements" || v.empty())
      throw std::invalid_argument("circuit file: malformed elements line");
    count = static_cast<int>(detail::parse_double(v, 0, "elements"));
    if (count < 1) throw std::invalid_argument("circuit file: element count must be >= 1");
  }
  for (int r = 1; r <= count; ++r) {
    std::istringstream ls(next_line(("element record " + std::to_string(r)).c_str()));
    std::string t, p, k, extra;
    ls >> t >> p >> k;
    if (t.empty() || p.empty() || k.empty())
      throw std::invalid_argument("circuit record " + std::to_string(r) + ": expected 3 fields");
    if (ls >> extra)
      throw std::invalid_argument("circuit record " + std::to_string(r) + ": trailing field '" +
                                  extra + "'");
    doc.spec.elements.push_back({detail::parse_double(t, r, "theta"),
                                 detail::parse_double(p, r, "linear_phi"),
                                 detail::parse_double(k, r, "kerr_phi")});
  }
  return doc;
}

}  // namespace nmzi
