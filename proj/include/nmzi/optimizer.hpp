#pragma once

#include "nmzi/analytics.hpp"
#include "nmzi/circuit.hpp"
#include "nmzi/observables.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <random>
#include <string>
#include <thread>
#include <vector>

// Constrained derivative-free optimization of cascade parameters: simplex
// local search inside a penalty loop, multi-started from warm seeds plus
// Latin-hypercube points.  Everything is deterministic for a fixed seed;
// restarts are independent, so running them on several threads changes
// nothing but wall time.

namespace nmzi {

inline constexpr double feasibility_tol = 1e-9;

struct ParamBounds {
  double theta_lo = -std::numbers::pi / 2, theta_hi = std::numbers::pi / 2;
  double phi_lo = -std::numbers::pi, phi_hi = std::numbers::pi;
  double kerr_lo = -std::numbers::pi / 2, kerr_hi = std::numbers::pi / 2;

  double lo(int kind) const { return kind == 0 ? theta_lo : kind == 1 ? phi_lo : kerr_lo; }
  double hi(int kind) const { return kind == 0 ? theta_hi : kind == 1 ? phi_hi : kerr_hi; }
};

struct Objective {
  enum class Kind { photon_probability, state_fidelity };
  Kind kind = Kind::photon_probability;
  int photon_n = 1;
  Eigen::VectorXcd target;

  static Objective photon(int n) {
    if (n < 0) throw std::invalid_argument("Objective::photon: n must be >= 0");
    Objective o;
    o.kind = Kind::photon_probability;
    o.photon_n = n;
    return o;
  }

  static Objective fidelity_to(Eigen::VectorXcd t) {
    const double nrm = t.norm();
    if (nrm <= 0.0) throw std::invalid_argument("Objective::fidelity_to: zero target");
    Objective o;
    o.kind = Kind::state_fidelity;
    o.target = t / nrm;
    return o;
  }
};

// Inequality over the photon-number probabilities.  Strict limits are closed
// by the margin, so a feasible point satisfies the strict original.
struct Constraint {
  enum class Kind { tail_max, keep_leakage_max };
  Kind kind = Kind::tail_max;
  int from = 2;            // tail_max: sum_{p >= from} P_p <= limit
  std::vector<int> keep;   // keep_leakage_max: 1 - sum_{p in keep} P_p <= limit
  double limit = 0.01;
  double margin = 1e-9;

  static Constraint tail(int from, double limit) {
    Constraint c;
    c.kind = Kind::tail_max;
    c.from = from;
    c.limit = limit;
    return c;
  }

  static Constraint leakage(std::vector<int> keep, double limit) {
    Constraint c;
    c.kind = Kind::keep_leakage_max;
    c.keep = std::move(keep);
    c.limit = limit;
    return c;
  }

  // positive = violated, negative = slack
  double violation(const Eigen::VectorXd& probs) const {
    double lhs = 0.0;
    if (kind == Kind::tail_max) {
      for (int k = from; k < probs.size(); ++k) lhs += probs(k);
    } else {
      lhs = 1.0;
      for (int k : keep)
        if (k < probs.size()) lhs -= probs(k);
    }
    return lhs - (limit - margin);
  }
};

struct OptimizationProblem {
  Objective objective;
  std::vector<Constraint> constraints;
  CircuitSpec base;                               // fixed values and default start
  std::vector<std::array<bool, 3>> free_mask;     // per element: theta, linear_phi, kerr_phi
  cplx alpha;
  long long budget = 100000;
  int n_starts = 8;
  unsigned long long seed = 1;
  int threads = 1;
  ParamBounds bounds;
  std::vector<CircuitSpec> warm_starts;           // tried right after the base point
  int block_passes = 3;                           // coordinate sweeps for wide problems
  double nm_step = 0.2;                           // initial simplex size, fraction of range

  int dim() const {
    int d = 0;
    for (const auto& m : free_mask) d += m[0] + m[1] + m[2];
    return d;
  }
};

struct OptimizationResult {
  CircuitSpec best_params;
  ObservableReport best_report;
  double objective_value = 0.0;
  double constraint_violation = 0.0;
  long long evaluations_used = 0;
  unsigned long long seed = 0;
  bool feasible = false;
};

struct EvalRecord {
  std::uint64_t params_hash;
  double objective;
  double violation;
};

struct RunLog {
  std::vector<EvalRecord> entries;
  void append(const EvalRecord& r) { entries.push_back(r); }
};

// FNV-1a over the raw parameter bytes.
inline std::uint64_t hash_params(const CircuitSpec& spec) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffull;
      h *= 1099511628211ull;
    }
  };
  for (const auto& e : spec.elements) {
    mix(e.theta);
    mix(e.linear_phi);
    mix(e.kerr_phi);
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline CircuitSpec uniform_spec(int n_units, double theta, double linear_phi, double kerr_phi) {
  if (n_units < 1) throw std::invalid_argument("uniform_spec: n_units must be >= 1");
  CircuitSpec spec;
  spec.elements.assign(n_units, {theta, linear_phi, kerr_phi});
  return spec;
}

inline std::vector<std::array<bool, 3>> uniform_mask(int n_units, bool th, bool ph, bool kr) {
  return std::vector<std::array<bool, 3>>(n_units, {th, ph, kr});
}

namespace detail {

struct Candidate {
  CircuitSpec spec;
  double objective = 0.0;
  double violation = 0.0;
};

inline bool candidate_better(const Candidate& a, const Candidate& b) {
  const bool fa = a.violation <= feasibility_tol, fb = b.violation <= feasibility_tol;
  if (fa != fb) return fa;
  if (fa) return a.objective > b.objective;
  if (a.violation != b.violation) return a.violation < b.violation;
  return a.objective > b.objective;
}

inline void bounds_vectors(const OptimizationProblem& pb, Eigen::VectorXd& lo, Eigen::VectorXd& hi) {
  lo.resize(pb.dim());
  hi.resize(pb.dim());
  int j = 0;
  for (const auto& m : pb.free_mask)
    for (int k = 0; k < 3; ++k)
      if (m[k]) {
        lo(j) = pb.bounds.lo(k);
        hi(j) = pb.bounds.hi(k);
        ++j;
      }
}

inline Eigen::VectorXd pack(const OptimizationProblem& pb, const CircuitSpec& spec) {
  Eigen::VectorXd x(pb.dim());
  int j = 0;
  for (std::size_t l = 0; l < pb.free_mask.size(); ++l) {
    const auto& m = pb.free_mask[l];
    const auto& e = spec.elements[l];
    if (m[0]) x(j++) = e.theta;
    if (m[1]) x(j++) = e.linear_phi;
    if (m[2]) x(j++) = e.kerr_phi;
  }
  return x;
}

inline void unpack(const OptimizationProblem& pb, const Eigen::VectorXd& x, CircuitSpec& spec) {
  int j = 0;
  for (std::size_t l = 0; l < pb.free_mask.size(); ++l) {
    const auto& m = pb.free_mask[l];
    auto& e = spec.elements[l];
    if (m[0]) e.theta = x(j++);
    if (m[1]) e.linear_phi = x(j++);
    if (m[2]) e.kerr_phi = x(j++);
  }
}

// packed indices belonging to each element, for the coordinate sweeps
inline std::vector<std::vector<int>> free_indices(const OptimizationProblem& pb) {
  std::vector<std::vector<int>> idx(pb.free_mask.size());
  int j = 0;
  for (std::size_t l = 0; l < pb.free_mask.size(); ++l)
    for (int k = 0; k < 3; ++k)
      if (pb.free_mask[l][k]) idx[l].push_back(j++);
  return idx;
}

struct NmResult {
  Eigen::VectorXd x;
  double f = 0.0;
};

// Classic simplex descent over a box; candidates are clamped componentwise.
// Consumes at most `cap` objective calls, reported through `used`.
template <class F>
NmResult nelder_mead(F&& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lo,
                     const Eigen::VectorXd& hi, long long cap, long long& used,
                     double step_frac) {
  const int d = static_cast<int>(x0.size());
  long long local = 0;
  auto clamp = [&](Eigen::VectorXd v) {
    for (int i = 0; i < d; ++i) v(i) = std::min(std::max(v(i), lo(i)), hi(i));
    return v;
  };
  auto ev = [&](const Eigen::VectorXd& v) {
    ++local;
    return f(v);
  };

  NmResult out{clamp(x0), 0.0};
  if (cap < 1) return out;
  out.f = ev(out.x);
  if (cap < d + 2 || d == 0) {
    used += local;
    return out;
  }

  std::vector<Eigen::VectorXd> p(d + 1, out.x);
  std::vector<double> fv(d + 1);
  fv[0] = out.f;
  for (int i = 0; i < d; ++i) {
    double step = step_frac * (hi(i) - lo(i));
    if (p[i + 1](i) + step > hi(i)) step = -step;
    p[i + 1](i) += step;
    p[i + 1] = clamp(p[i + 1]);
    fv[i + 1] = ev(p[i + 1]);
  }

  std::vector<int> ord(d + 1);
  const double rho = 1.0, chi = 2.0, gamma = 0.5, sigma = 0.5;
  while (local + 2 <= cap) {
    std::iota(ord.begin(), ord.end(), 0);
    std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    const int best = ord[0], worst = ord[d], second = ord[d - 1];

    double spread = 0.0;
    for (int i = 0; i <= d; ++i) spread = std::max(spread, (p[i] - p[best]).cwiseAbs().maxCoeff());
    if (fv[worst] - fv[best] < 1e-14 * (std::abs(fv[best]) + 1e-14) && spread < 1e-11) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (int i = 0; i <= d; ++i)
      if (i != worst) centroid += p[i];
    centroid /= d;

    const Eigen::VectorXd xr = clamp(centroid + rho * (centroid - p[worst]));
    const double fr = ev(xr);
    if (fr < fv[best]) {
      if (local < cap) {
        const Eigen::VectorXd xe = clamp(centroid + chi * (xr - centroid));
        const double fe = ev(xe);
        if (fe < fr) {
          p[worst] = xe;
          fv[worst] = fe;
        } else {
          p[worst] = xr;
          fv[worst] = fr;
        }
      } else {
        p[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      p[worst] = xr;
      fv[worst] = fr;
    } else {
      const bool outside = fr < fv[worst];
      const Eigen::VectorXd xc = clamp(
          outside ? Eigen::VectorXd(centroid + gamma * (xr - centroid))
                  : Eigen::VectorXd(centroid - gamma * (centroid - p[worst])));
      const double fc = ev(xc);
      if (fc < (outside ? fr : fv[worst])) {
        p[worst] = xc;
        fv[worst] = fc;
      } else {
        for (int i = 0; i <= d && local < cap; ++i) {
          if (i == best) continue;
          p[i] = clamp(p[best] + sigma * (p[i] - p[best]));
          fv[i] = ev(p[i]);
        }
      }
    }
  }

  int best = 0;
  for (int i = 1; i <= d; ++i)
    if (fv[i] < fv[best]) best = i;
  out.x = p[best];
  out.f = fv[best];
  used += local;
  return out;
}

}  // namespace detail

// Latin-hypercube start points over the box.
inline std::vector<Eigen::VectorXd> lhs_points(int count, const Eigen::VectorXd& lo,
                                               const Eigen::VectorXd& hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int d = static_cast<int>(lo.size());
  std::vector<Eigen::VectorXd> pts(count, Eigen::VectorXd(d));
  std::vector<int> perm(count);
  for (int j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int i = 0; i < count; ++i)
      pts[i](j) = lo(j) + (hi(j) - lo(j)) * ((perm[i] + u(rng)) / count);
  }
  return pts;
}

// Forward model shared by every optimizer path.  Immutable; thread safe.
class ProblemEvaluator {
 public:
  explicit ProblemEvaluator(const OptimizationProblem& pb)
      : pb_(pb), cutoff_(FockCutoff::for_alpha(pb.alpha)), evolver_(cutoff_) {}

  struct Forward {
    double objective = 0.0;
    double violation = 0.0;
  };

  Forward forward(const CircuitSpec& spec) const {
    const TwoModeState s = evolver_.run(spec, pb_.alpha);
    const Eigen::VectorXd probs = photon_probabilities(s);
    Forward fw;
    fw.objective = pb_.objective.kind == Objective::Kind::photon_probability
                       ? (pb_.objective.photon_n < probs.size() ? probs(pb_.objective.photon_n) : 0.0)
                       : fidelity_to_target(s, pb_.objective.target);
    fw.violation = violation(probs);
    return fw;
  }

  double violation(const Eigen::VectorXd& probs) const {
    double v = 0.0;
    bool first = true;
    for (const auto& c : pb_.constraints) {
      const double cv = c.violation(probs);
      v = first ? cv : std::max(v, cv);
      first = false;
    }
    return pb_.constraints.empty() ? 0.0 : v;
  }

  ObservableReport report(const CircuitSpec& spec) const {
    const TwoModeState s = evolver_.run(spec, pb_.alpha);
    const Eigen::VectorXcd* target =
        pb_.objective.kind == Objective::Kind::state_fidelity ? &pb_.objective.target : nullptr;
    return make_report(s, target);
  }

  const FockCutoff& cutoff() const { return cutoff_; }

 private:
  const OptimizationProblem& pb_;
  FockCutoff cutoff_;
  Evolver evolver_;
};

namespace detail {

struct RestartOutcome {
  Candidate best;
  long long evals = 0;
};

inline RestartOutcome run_restart(const ProblemEvaluator& ev, const OptimizationProblem& pb,
                                  const Eigen::VectorXd& x0, long long budget, RunLog* log) {
  Candidate best;
  bool has_best = false;
  CircuitSpec scratch = pb.base;
  long long remaining = budget;
  long long evals = 0;

  double weight = 1e3;
  auto penalized = [&](const Eigen::VectorXd& x) {
    unpack(pb, x, scratch);
    const auto fw = ev.forward(scratch);
    ++evals;
    if (log) log->append({hash_params(scratch), fw.objective, fw.violation});
    Candidate c{scratch, fw.objective, fw.violation};
    if (!has_best || candidate_better(c, best)) {
      best = c;
      has_best = true;
    }
    return -fw.objective + weight * std::max(0.0, fw.violation);
  };

  Eigen::VectorXd lo, hi;
  bounds_vectors(pb, lo, hi);
  const auto idx = free_indices(pb);
  int free_elements = 0;
  for (const auto& v : idx) free_elements += !v.empty();

  Eigen::VectorXd x = x0;
  const double weights[3] = {1e3, 1e5, 1e7};
  for (int round = 0; round < 3 && remaining > 0; ++round) {
    weight = weights[round];
    long long share = std::min(remaining, budget / 3 + (round == 2 ? budget % 3 : 0));
    if (share <= 0) continue;
    long long share_left = share;

    if (pb.dim() > 8 && free_elements > 1 && pb.block_passes > 0) {
      const long long block_budget = share * 3 / 5;
      const long long per_pass = block_budget / pb.block_passes;
      for (int pass = 0; pass < pb.block_passes; ++pass) {
        const long long slice = per_pass / std::max(1, free_elements);
        for (const auto& sub : idx) {
          if (sub.empty()) continue;
          const int sd = static_cast<int>(sub.size());
          if (slice < 3 * (sd + 2) || share_left < sd + 2) continue;
          Eigen::VectorXd sx(sd), slo(sd), shi(sd);
          for (int i = 0; i < sd; ++i) {
            sx(i) = x(sub[i]);
            slo(i) = lo(sub[i]);
            shi(i) = hi(sub[i]);
          }
          auto sub_f = [&](const Eigen::VectorXd& y) {
            Eigen::VectorXd full = x;
            for (int i = 0; i < sd; ++i) full(sub[i]) = y(i);
            return penalized(full);
          };
          long long used = 0;
          const NmResult r = nelder_mead(sub_f, sx, slo, shi, std::min(slice, share_left), used,
                                         pb.nm_step);
          share_left -= used;
          remaining -= used;
          for (int i = 0; i < sd; ++i) x(sub[i]) = r.x(i);
        }
      }
    }

    if (share_left > 0) {
      long long used = 0;
      const NmResult r = nelder_mead(penalized, x, lo, hi, share_left, used, pb.nm_step);
      remaining -= used;
      x = r.x;
    }
  }

  // leftover polish at the final weight
  if (remaining > pb.dim() + 2) {
    weight = weights[2];
    long long used = 0;
    const NmResult r = nelder_mead(penalized, x, lo, hi, remaining, used, pb.nm_step / 2);
    remaining -= used;
    x = r.x;
  }

  if (!has_best) {
    unpack(pb, x, scratch);
    const auto fw = ev.forward(scratch);
    ++evals;
    best = {scratch, fw.objective, fw.violation};
  }
  return {best, evals};
}

inline void validate_problem(const OptimizationProblem& pb) {
  if (pb.base.elements.empty()) throw std::invalid_argument("optimize: empty base circuit");
  if (pb.free_mask.size() != pb.base.elements.size())
    throw std::invalid_argument("optimize: free mask and base circuit differ in length");
  if (pb.budget < 1) throw std::invalid_argument("optimize: budget must be >= 1");
  if (pb.n_starts < 1) throw std::invalid_argument("optimize: n_starts must be >= 1");
  if (pb.threads < 1) throw std::invalid_argument("optimize: threads must be >= 1");
  if (pb.dim() < 1) throw std::invalid_argument("optimize: no free parameters");
  for (const auto& c : pb.constraints) {
    if (c.kind == Constraint::Kind::tail_max && c.from < 0)
      throw std::invalid_argument("optimize: constraint index out of range");
    if (c.kind == Constraint::Kind::keep_leakage_max && c.keep.empty())
      throw std::invalid_argument("optimize: leakage constraint keeps nothing");
  }
  for (const auto& w : pb.warm_starts)
    if (w.elements.size() != pb.base.elements.size())
      throw std::invalid_argument("optimize: warm start length differs from base");
}

}  // namespace detail

// Best feasible parameters found within the budget; when nothing feasible
// turns up, the least-violating candidate is returned with feasible = false.
inline OptimizationResult optimize(const OptimizationProblem& pb, RunLog* log = nullptr) {
  detail::validate_problem(pb);
  const ProblemEvaluator ev(pb);

  Eigen::VectorXd lo, hi;
  detail::bounds_vectors(pb, lo, hi);

  std::vector<Eigen::VectorXd> starts;
  starts.push_back(detail::pack(pb, pb.base));
  for (const auto& w : pb.warm_starts) starts.push_back(detail::pack(pb, w));
  const int n = std::max<int>(pb.n_starts, static_cast<int>(starts.size()));
  if (static_cast<int>(starts.size()) < n) {
    const auto fill = lhs_points(n - static_cast<int>(starts.size()), lo, hi,
                                 splitmix64(pb.seed ^ 0x5eedu));
    starts.insert(starts.end(), fill.begin(), fill.end());
  }

  std::vector<long long> shares(n, pb.budget / n);
  for (int r = 0; r < static_cast<int>(pb.budget % n); ++r) ++shares[r];

  std::vector<detail::Candidate> results(n);
  std::vector<RunLog> logs(log ? n : 0);
  auto work = [&](int t, int stride) {
    for (int r = t; r < n; r += stride)
      if (shares[r] > 0)
        results[r] = detail::run_restart(ev, pb, starts[r], shares[r], log ? &logs[r] : nullptr);
  };
  const int threads = std::min(pb.threads, n);
  if (threads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }

  long long evals = 0;
  if (log)
    for (const auto& l : logs) {
      evals += static_cast<long long>(l.entries.size());
      log->entries.insert(log->entries.end(), l.entries.begin(), l.entries.end());
    }

  detail::Candidate best = results[0];
  for (int r = 1; r < n; ++r)
    if (shares[r] > 0 && detail::candidate_better(results[r], best)) best = results[r];

  // fresh forward pass certifies the flag the caller sees
  OptimizationResult out;
  out.best_params = best.spec;
  out.best_report = ev.report(best.spec);
  out.constraint_violation = ev.violation(out.best_report.p);
  out.feasible = out.constraint_violation <= feasibility_tol;
  out.objective_value = pb.objective.kind == Objective::Kind::photon_probability
                            ? out.best_report.p_at(pb.objective.photon_n)
                            : out.best_report.fidelity.value_or(0.0);
  out.evaluations_used = log ? evals : std::accumulate(shares.begin(), shares.end(), 0ll);
  out.seed = pb.seed;
  return out;
}

// Problem builders -----------------------------------------------------------

// Two-element interferometer with the analytic dark-point seed.
inline OptimizationProblem simple_filtration_problem(cplx alpha, double kerr_phi, Constraint c,
                                                     long long budget, unsigned long long seed) {
  OptimizationProblem pb;
  pb.objective = Objective::photon(1);
  pb.constraints = {std::move(c)};
  pb.base = simple_nmzi(optimal_simple_nmzi(kerr_phi));
  pb.free_mask = {{true, true, false}, {true, false, false}};
  pb.alpha = alpha;
  pb.budget = budget;
  pb.seed = seed;
  pb.n_starts = 12;
  return pb;
}

// N-element cascade maximizing P_n at fixed Kerr coefficient.
inline OptimizationProblem extraction_problem(int n_units, int photon_n, cplx alpha,
                                              double kerr_phi, Constraint c, long long budget,
                                              unsigned long long seed) {
  OptimizationProblem pb;
  pb.objective = Objective::photon(photon_n);
  pb.constraints = {std::move(c)};
  pb.base = uniform_spec(n_units, 0.0, 0.0, kerr_phi);
  pb.free_mask = uniform_mask(n_units, true, true, false);
  pb.alpha = alpha;
  pb.budget = budget;
  pb.seed = seed;
  return pb;
}

// N-element cascade maximizing fidelity to a target, all parameters free.
inline OptimizationProblem superposition_problem(const Eigen::VectorXcd& target, int n_units,
                                                 cplx alpha, double leak_limit, long long budget,
                                                 unsigned long long seed) {
  Objective obj = Objective::fidelity_to(target);
  std::vector<int> keep;
  for (int k = 0; k < obj.target.size(); ++k)
    if (std::abs(obj.target(k)) > 1e-12) keep.push_back(k);
  OptimizationProblem pb;
  pb.objective = std::move(obj);
  pb.constraints = {Constraint::leakage(keep, leak_limit)};
  pb.base = uniform_spec(n_units, 0.0, 0.0, 0.1);
  pb.free_mask = uniform_mask(n_units, true, true, true);
  pb.alpha = alpha;
  pb.budget = budget;
  pb.seed = seed;
  return pb;
}

inline OptimizationResult optimize_superposition(const Eigen::VectorXcd& target, int n_units,
                                                 cplx alpha, long long budget,
                                                 unsigned long long seed, RunLog* log = nullptr) {
  return optimize(superposition_problem(target, n_units, alpha, 0.01, budget, seed), log);
}

// Sweeps ---------------------------------------------------------------------

enum class SweepVariable { alpha_squared, n_units, kerr_phi, linear_phi };

struct SweepRow {
  double value = 0.0;
  bool optimized = false;
  bool ok = true;
  std::string error;
  OptimizationResult result;
  ObservableReport report;
};

namespace detail {

inline CircuitSpec resized_spec(const CircuitSpec& spec, int n_units, double pad_kerr) {
  CircuitSpec out = spec;
  if (n_units < spec.size()) out.elements.resize(n_units);
  while (out.size() < n_units) out.elements.push_back({0.0, 0.0, pad_kerr});
  return out;
}

}  // namespace detail

// One row per grid point.  Pure sweeps evaluate the base circuit directly;
// optimizing sweeps rerun the optimizer, optionally warm-starting each point
// from the previous best.  Per-point failures mark the row and the sweep
// continues.
inline std::vector<SweepRow> sweep(const OptimizationProblem& base, SweepVariable var,
                                   const std::vector<double>& grid, bool optimize_points,
                                   bool chain_warm_start, RunLog* log = nullptr) {
  if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  CircuitSpec prev_best;
  bool have_prev = false;

  for (std::size_t i = 0; i < grid.size(); ++i) {
    SweepRow row;
    row.value = grid[i];
    row.optimized = optimize_points;
    try {
      OptimizationProblem pb = base;
      pb.seed = splitmix64(base.seed + i);
      switch (var) {
        case SweepVariable::alpha_squared:
          if (grid[i] < 0.0) throw std::invalid_argument("sweep: negative |alpha|^2");
          pb.alpha = std::sqrt(grid[i]);
          break;
        case SweepVariable::n_units: {
          const int n = static_cast<int>(grid[i]);
          const double pad_kerr = pb.base.elements.back().kerr_phi;
          pb.base = detail::resized_spec(pb.base, n, pad_kerr);
          pb.free_mask.assign(n, base.free_mask.back());
          for (auto& w : pb.warm_starts) w = detail::resized_spec(w, n, pad_kerr);
          break;
        }
        case SweepVariable::kerr_phi:
          for (auto& e : pb.base.elements) e.kerr_phi = grid[i];
          for (auto& w : pb.warm_starts)
            for (auto& e : w.elements) e.kerr_phi = grid[i];
          break;
        case SweepVariable::linear_phi:
          // raw element parameter of the first element
          pb.base.elements.front().linear_phi = grid[i];
          break;
      }
      if (optimize_points) {
        if (chain_warm_start && have_prev) {
          CircuitSpec w = prev_best;
          if (var == SweepVariable::n_units)
            w = detail::resized_spec(w, pb.base.size(), pb.base.elements.back().kerr_phi);
          if (var == SweepVariable::kerr_phi)
            for (auto& e : w.elements) e.kerr_phi = grid[i];
          if (w.size() == pb.base.size()) pb.warm_starts.insert(pb.warm_starts.begin(), w);
        }
        row.result = optimize(pb, log);
        row.report = row.result.best_report;
        if (chain_warm_start) {
          prev_best = row.result.best_params;
          have_prev = true;
        }
      } else {
        const ProblemEvaluator ev(pb);
        row.report = ev.report(pb.base);
      }
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// Perturbation studies --------------------------------------------------------

struct PerturbationStudy {
  CircuitSpec base;
  double magnitude = 0.0;  // uniform on [-magnitude, magnitude], radians
  int samples = 100;
  unsigned long long seed = 1;
};

struct PerturbationSummary {
  double base_value = 0.0;
  std::vector<double> values;
  double mean = 0.0, median = 0.0, min = 0.0, max = 0.0;
  std::vector<int> histogram;  // 20 bins over [min, max]
  double bin_lo = 0.0, bin_width = 0.0;
};

// Splitter angles and linear phases jitter; Kerr coefficients stay put.
inline PerturbationSummary perturbation_study(const PerturbationStudy& st, cplx alpha,
                                              const Objective& objective) {
  if (st.magnitude < 0.0) throw std::invalid_argument("perturbation_study: negative magnitude");
  if (st.samples < 1) throw std::invalid_argument("perturbation_study: samples must be >= 1");

  OptimizationProblem pb;
  pb.objective = objective;
  pb.base = st.base;
  pb.free_mask = uniform_mask(st.base.size(), true, true, false);
  pb.alpha = alpha;
  const ProblemEvaluator ev(pb);

  PerturbationSummary out;
  out.base_value = ev.forward(st.base).objective;

  std::mt19937_64 rng(st.seed);
  std::uniform_real_distribution<double> u(-st.magnitude, st.magnitude);
  out.values.reserve(st.samples);
  CircuitSpec s = st.base;
  for (int i = 0; i < st.samples; ++i) {
    for (std::size_t l = 0; l < s.elements.size(); ++l) {
      s.elements[l].theta = st.base.elements[l].theta + u(rng);
      s.elements[l].linear_phi = st.base.elements[l].linear_phi + u(rng);
    }
    out.values.push_back(ev.forward(s).objective);
  }

  std::vector<double> sorted = out.values;
  std::sort(sorted.begin(), sorted.end());
  out.min = sorted.front();
  out.max = sorted.back();
  out.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / sorted.size();
  out.median = sorted.size() % 2 ? sorted[sorted.size() / 2]
                                 : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
  const int bins = 20;
  out.histogram.assign(bins, 0);
  out.bin_lo = out.min;
  out.bin_width = (out.max - out.min) / bins;
  for (double v : out.values) {
    int b = out.bin_width > 0.0 ? static_cast<int>((v - out.bin_lo) / out.bin_width) : 0;
    out.histogram[std::min(std::max(b, 0), bins - 1)]++;
  }
  return out;
}

}  // namespace nmzi
