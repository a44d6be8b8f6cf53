#pragma once

#include "nmzi/analytics.hpp"
#include "nmzi/optimizer.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

// Config-driven experiment runner.  Each preset reproduces one published
// dataset as a CSV table plus a JSON manifest; `custom` exposes the same
// machinery for ad-hoc problems.  Identical config and seed give byte
// identical CSV output.

namespace nmzi {

inline constexpr const char* artifact_version = "1.0.0";

using json = nlohmann::ordered_json;

struct ExperimentConfig {
  std::string preset = "custom";
  std::string out_dir;
  unsigned long long seed = 42;
  long long budget = 100000;
  int threads = 1;
  int n_starts = 6;

  double alpha2 = 1.0;
  double kerr_phi = 0.1;
  int n_units = 20;
  std::vector<double> target_amps = {1.0, 1.0};
  std::string objective = "p1";
  std::string constraint = "tail 2 0.01";

  std::vector<double> phi_grid;
  std::vector<double> alpha2_grid;
  std::vector<double> kerr_grid;
  std::vector<int> n_grid;
  std::vector<int> fock_n = {1, 2, 3};

  int samples = 200;
  double magnitude = 0.01 * std::numbers::pi;
  bool write_log = true;

  std::vector<ElementParams> elements;  // optional base circuit
};

namespace detail {

inline std::vector<double> linspace(double lo, double hi, int count) {
  std::vector<double> g(count);
  for (int i = 0; i < count; ++i) g[i] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
  return g;
}

// "lo:hi:count" or a comma list
inline std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> g;
  if (text.find(':') != std::string::npos) {
    double lo, hi;
    int count;
    char c1, c2;
    std::istringstream in(text);
    if (!(in >> lo >> c1 >> hi >> c2 >> count) || c1 != ':' || c2 != ':' || count < 1)
      throw std::invalid_argument("bad grid '" + text + "' (want lo:hi:count)");
    return linspace(lo, hi, count);
  }
  std::istringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (tok.empty()) continue;
    g.push_back(std::stod(tok));
  }
  if (g.empty()) throw std::invalid_argument("bad grid '" + text + "'");
  return g;
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"fig1d", "fig1e", "fig2c", "fig2d", "fig3",
                                                 "figS1", "figS2", "figS3", "figS4", "custom"};
  return names;
}

// Every preset pins all parameters it uses; a config file or CLI flag can
// override any of them afterwards.
inline ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  const double pi = std::numbers::pi;
  if (name == "fig1d") {
    c.seed = 101;
    c.alpha2 = 0.01;
    c.kerr_phi = 0.1;
    c.phi_grid = detail::linspace(-0.5 * pi, 0.5 * pi, 201);
    c.budget = 0;
  } else if (name == "fig1e") {
    c.seed = 102;
    c.alpha2 = 0.01;
    c.kerr_grid = {0.05, 0.1, 0.5};
    c.phi_grid = detail::linspace(-0.5 * pi, 0.5 * pi, 200);
    c.budget = 0;
  } else if (name == "fig2c") {
    c.seed = 103;
    c.alpha2 = 1.0;
    c.kerr_phi = 0.1;
    c.constraint = "tail 2 0.01";
    for (int n = 2; n <= 40; n += 2) c.n_grid.push_back(n);
    c.budget = 240000;
    c.n_starts = 6;
  } else if (name == "fig2d") {
    c.seed = 104;
    c.kerr_phi = 0.1;
    c.n_units = 40;
    c.fock_n = {1, 2, 3};
    c.alpha2_grid = {0.25, 0.5, 0.75, 1.0, 1.25, 1.5};
    c.budget = 540000;
    c.n_starts = 4;
  } else if (name == "fig3") {
    c.seed = 105;
    c.n_units = 20;
    c.target_amps = {1.0, 1.0};
    c.alpha2_grid = {0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
    c.budget = 800000;
    c.n_starts = 4;
  } else if (name == "figS1") {
    c.seed = 106;
    c.kerr_phi = 0.1;
    c.alpha2_grid = detail::linspace(0.1, 2.0, 12);
    c.budget = 480000;
    c.n_starts = 8;
  } else if (name == "figS2") {
    c.seed = 107;
    c.alpha2 = 1.0;
    c.kerr_grid = detail::linspace(0.1, 1.5, 8);
    for (int n = 2; n <= 24; n += 2) c.n_grid.push_back(n);
    c.budget = 480000;
    c.n_starts = 6;
  } else if (name == "figS3") {
    c.seed = 108;
    c.alpha2 = 1.0;
    c.kerr_phi = 0.1;
    c.n_units = 20;
    c.constraint = "tail 2 0.01";
    c.alpha2_grid = detail::linspace(0.4, 2.0, 17);
    c.budget = 150000;
    c.n_starts = 4;
  } else if (name == "figS4") {
    c.seed = 109;
    c.alpha2 = 1.0;
    c.kerr_phi = 0.1;
    c.n_units = 20;
    c.constraint = "tail 2 0.01";
    c.samples = 200;
    c.magnitude = 0.01 * pi;
    c.budget = 150000;
    c.n_starts = 4;
  } else if (name == "custom") {
    c.seed = 42;
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  return c;
}

// Flat key/value text with an optional `elements:` section; grammar in
// docs/config_format.md.
inline ExperimentConfig parse_config(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::vector<ElementParams> elements;
  bool in_elements = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line == "elements:") {
      in_elements = true;
      continue;
    }
    if (in_elements) {
      std::istringstream ls(line);
      double t, p, k;
      if (!(ls >> t >> p >> k))
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": element record needs 3 numbers");
      elements.push_back({t, p, k});
      continue;
    }
    std::string key, rest;
    std::istringstream ls(line);
    ls >> key;
    std::getline(ls, rest);
    rest = detail::trim(rest);
    if (!rest.empty() && rest[0] == '=') rest = detail::trim(rest.substr(1));
    if (key.empty() || rest.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected 'key value'");
    kv[key] = rest;
  }

  ExperimentConfig c = preset_config(kv.count("preset") ? kv.at("preset") : "custom");
  for (const auto& [key, value] : kv) {
    try {
      if (key == "preset") {
      } else if (key == "out")
        c.out_dir = value;
      else if (key == "seed")
        c.seed = std::stoull(value);
      else if (key == "budget")
        c.budget = std::stoll(value);
      else if (key == "threads")
        c.threads = std::stoi(value);
      else if (key == "starts")
        c.n_starts = std::stoi(value);
      else if (key == "alpha2")
        c.alpha2 = std::stod(value);
      else if (key == "kerr_phi")
        c.kerr_phi = std::stod(value);
      else if (key == "n_units")
        c.n_units = std::stoi(value);
      else if (key == "target")
        c.target_amps = detail::parse_grid(value);
      else if (key == "objective")
        c.objective = value;
      else if (key == "constraint")
        c.constraint = value;
      else if (key == "phi_grid")
        c.phi_grid = detail::parse_grid(value);
      else if (key == "alpha2_grid")
        c.alpha2_grid = detail::parse_grid(value);
      else if (key == "kerr_grid")
        c.kerr_grid = detail::parse_grid(value);
      else if (key == "n_grid") {
        c.n_grid.clear();
        for (double v : detail::parse_grid(value)) c.n_grid.push_back(static_cast<int>(v));
      } else if (key == "fock_n") {
        c.fock_n.clear();
        for (double v : detail::parse_grid(value)) c.fock_n.push_back(static_cast<int>(v));
      } else if (key == "samples")
        c.samples = std::stoi(value);
      else if (key == "magnitude")
        c.magnitude = std::stod(value);
      else if (key == "log")
        c.write_log = value != "0" && value != "false";
      else
        throw std::invalid_argument("unknown key");
    } catch (const std::exception& e) {
      throw std::invalid_argument("config key '" + key + "': " + e.what());
    }
  }
  c.elements = std::move(elements);
  return c;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file '" + path + "'");
  return parse_config(in);
}

inline Constraint parse_constraint(const std::string& text) {
  std::istringstream in(text);
  std::string kind;
  in >> kind;
  if (kind == "tail") {
    int from;
    double limit;
    if (!(in >> from >> limit)) throw std::invalid_argument("constraint 'tail <from> <limit>'");
    return Constraint::tail(from, limit);
  }
  if (kind == "leakage") {
    std::string keep_s;
    double limit;
    if (!(in >> keep_s >> limit)) throw std::invalid_argument("constraint 'leakage <k0,k1,..> <limit>'");
    std::vector<int> keep;
    for (double v : detail::parse_grid(keep_s)) keep.push_back(static_cast<int>(v));
    return Constraint::leakage(keep, limit);
  }
  throw std::invalid_argument("unknown constraint kind '" + kind + "'");
}

inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["preset"] = c.preset;
  j["seed"] = c.seed;
  j["budget"] = c.budget;
  j["threads"] = c.threads;
  j["starts"] = c.n_starts;
  j["alpha2"] = c.alpha2;
  j["kerr_phi"] = c.kerr_phi;
  j["n_units"] = c.n_units;
  j["target"] = c.target_amps;
  j["objective"] = c.objective;
  j["constraint"] = c.constraint;
  j["phi_grid_size"] = c.phi_grid.size();
  j["phi_grid"] = c.phi_grid;
  j["alpha2_grid"] = c.alpha2_grid;
  j["kerr_grid"] = c.kerr_grid;
  j["n_grid"] = c.n_grid;
  j["fock_n"] = c.fock_n;
  j["samples"] = c.samples;
  j["magnitude"] = c.magnitude;
  j["log"] = c.write_log;
  j["elements"] = c.elements.size();
  return j;
}

struct ExperimentOutcome {
  int exit_code = 0;
  std::string message;
  std::vector<std::string> outputs;
};

namespace detail {

struct CsvWriter {
  std::ofstream out;
  explicit CsvWriter(const std::filesystem::path& path, const std::string& header) : out(path) {
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << header << "\n";
  }
  void row(const std::string& r) { out << r << "\n"; }
};

inline std::string join12(std::initializer_list<double> vals) {
  std::string s;
  bool first = true;
  for (double v : vals) {
    if (!first) s += ",";
    s += fmt12(v);
    first = false;
  }
  return s;
}

inline void write_run_log(const std::filesystem::path& path, const RunLog& log) {
  std::ofstream out(path);
  out << "eval,params_hash,objective,violation\n";
  char buf[96];
  for (std::size_t i = 0; i < log.entries.size(); ++i) {
    const auto& e = log.entries[i];
    std::snprintf(buf, sizeof(buf), "%zu,%016llx,%.12g,%.12g\n", i,
                  static_cast<unsigned long long>(e.params_hash), e.objective, e.violation);
    out << buf;
  }
}

inline void write_spec(const std::filesystem::path& path, const CircuitSpec& spec, cplx alpha) {
  std::ofstream out(path, std::ios::binary);
  out << serialize_circuit({alpha, FockCutoff::for_alpha(alpha).n_max, spec});
}

inline ExperimentConfig require_grid(ExperimentConfig c, const std::vector<double>& grid,
                                     const char* name) {
  if (grid.empty())
    throw std::invalid_argument(std::string("preset ") + c.preset + ": empty " + name);
  return c;
}

}  // namespace detail

// Forward declaration used by the runners that need an optimized base.
inline OptimizationResult optimize_preset_base(const ExperimentConfig& c, RunLog* log);

inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();

  ExperimentOutcome outcome;
  json summary;
  RunLog log;
  RunLog* logp = cfg.write_log ? &log : nullptr;

  // validate before touching the filesystem
  const bool needs_phi = cfg.preset == "fig1d" || cfg.preset == "fig1e";
  if (needs_phi && cfg.phi_grid.empty())
    throw std::invalid_argument(cfg.preset + ": empty phi_grid");
  if (cfg.preset == "fig1e" && cfg.kerr_grid.empty())
    throw std::invalid_argument("fig1e: empty kerr_grid");
  if (cfg.preset == "fig2c" && cfg.n_grid.empty()) throw std::invalid_argument("fig2c: empty n_grid");
  if ((cfg.preset == "fig2d" || cfg.preset == "fig3" || cfg.preset == "figS1" ||
       cfg.preset == "figS3") &&
      cfg.alpha2_grid.empty())
    throw std::invalid_argument(cfg.preset + ": empty alpha2_grid");
  if (cfg.preset == "figS2" && (cfg.kerr_grid.empty() || cfg.n_grid.empty()))
    throw std::invalid_argument("figS2: empty kerr_grid or n_grid");
  if (cfg.out_dir.empty()) throw std::invalid_argument("no output directory configured");

  const fs::path out = cfg.out_dir;
  fs::create_directories(out);
  const fs::path data_path = out / (cfg.preset + ".csv");
  auto add_output = [&](const fs::path& p) { outcome.outputs.push_back(p.string()); };

  const double alpha = std::sqrt(cfg.alpha2);

  if (cfg.preset == "fig1d") {
    // photon-number probabilities against the arm phase at the dark-point eta
    const SimpleNmziParams base = optimal_simple_nmzi(cfg.kerr_phi);
    const Evolver ev(FockCutoff::for_alpha(alpha));
    detail::CsvWriter csv(data_path, "linear_phi,p0,p1,p2,p3,p4,p_rest");
    for (double phi : cfg.phi_grid) {
      SimpleNmziParams p = base;
      p.linear_phi = phi;
      const ObservableReport r = make_report(ev.run(simple_nmzi(p), alpha));
      csv.row(detail::join12({phi, r.p_at(0), r.p_at(1), r.p_at(2), r.p_at(3), r.p_at(4), r.tail(5)}));
    }
    add_output(data_path);
  } else if (cfg.preset == "fig1e") {
    // exact vs leading-order photon statistic across the arm phase
    const Evolver ev(FockCutoff::for_alpha(alpha));
    detail::CsvWriter csv(data_path, "kerr_phi,linear_phi,g2_exact,g2_approx");
    for (double kerr : cfg.kerr_grid) {
      const SimpleNmziParams base = optimal_simple_nmzi(kerr);
      for (double phi : cfg.phi_grid) {
        SimpleNmziParams p = base;
        p.linear_phi = phi;
        const ObservableReport r = make_report(ev.run(simple_nmzi(p), alpha));
        csv.row(detail::fmt12(kerr) + "," + detail::fmt12(phi) + "," + detail::fmt12_opt(r.g2) +
                "," + detail::fmt12_opt(approx_g2(p)));
      }
    }
    add_output(data_path);
  } else if (cfg.preset == "fig2c") {
    // single-photon extraction against cascade depth
    OptimizationProblem pb = extraction_problem(2, 1, alpha, cfg.kerr_phi,
                                                parse_constraint(cfg.constraint),
                                                std::max<long long>(1, cfg.budget / cfg.n_grid.size()),
                                                cfg.seed);
    pb.warm_starts.push_back(simple_nmzi(optimal_simple_nmzi(cfg.kerr_phi)));
    pb.n_starts = cfg.n_starts;
    pb.threads = cfg.threads;
    std::vector<double> grid(cfg.n_grid.begin(), cfg.n_grid.end());
    const auto rows = sweep(pb, SweepVariable::n_units, grid, true, true, logp);
    detail::CsvWriter csv(data_path, "n_units,best_p1,asymptote,feasible,violation,evaluations");
    fs::create_directories(out / "specs");
    const double asym = 1.0 - std::exp(-cfg.alpha2);
    for (const auto& r : rows) {
      if (!r.ok) {
        csv.row(detail::fmt12(r.value) + ",error,,,,\"" + r.error + "\"");
        continue;
      }
      csv.row(detail::fmt12(r.value) + "," + detail::fmt12(r.result.best_report.p_at(1)) + "," +
              detail::fmt12(asym) + "," + (r.result.feasible ? "1" : "0") + "," +
              detail::fmt12(r.result.constraint_violation) + "," +
              std::to_string(r.result.evaluations_used));
      detail::write_spec(out / "specs" / ("n" + std::to_string(static_cast<int>(r.value)) + ".nmzi"),
                         r.result.best_params, alpha);
    }
    add_output(data_path);
  } else if (cfg.preset == "fig2d") {
    // n-photon extraction against input intensity, N fixed
    detail::CsvWriter csv(data_path, "fock_n,alpha2,best_pn,asymptote,feasible,violation");
    fs::create_directories(out / "specs");
    const long long per_point =
        std::max<long long>(1, cfg.budget / (cfg.fock_n.size() * cfg.alpha2_grid.size()));
    for (int n : cfg.fock_n) {
      OptimizationProblem pb =
          extraction_problem(cfg.n_units, n, 1.0, cfg.kerr_phi,
                             Constraint::leakage({0, n}, 0.01), per_point, cfg.seed + n);
      pb.n_starts = cfg.n_starts;
      pb.threads = cfg.threads;
      std::vector<double> grid;
      for (double a2 : cfg.alpha2_grid) grid.push_back(a2 / n);
      const auto rows = sweep(pb, SweepVariable::alpha_squared, grid, true, true, logp);
      for (const auto& r : rows) {
        if (!r.ok) {
          csv.row(std::to_string(n) + "," + detail::fmt12(r.value) + ",error,,,\"" + r.error + "\"");
          continue;
        }
        csv.row(std::to_string(n) + "," + detail::fmt12(r.value) + "," +
                detail::fmt12(r.result.best_report.p_at(n)) + "," +
                detail::fmt12(extraction_asymptote(n, std::sqrt(r.value))) + "," +
                (r.result.feasible ? "1" : "0") + "," + detail::fmt12(r.result.constraint_violation));
        char tag[48];
        std::snprintf(tag, sizeof(tag), "n%d_a2_%.4g.nmzi", n, r.value);
        detail::write_spec(out / "specs" / tag, r.result.best_params, std::sqrt(r.value));
      }
    }
    add_output(data_path);
  } else if (cfg.preset == "fig3") {
    // superposition extraction against input intensity
    Eigen::VectorXcd target(cfg.target_amps.size());
    for (std::size_t i = 0; i < cfg.target_amps.size(); ++i) target(i) = cfg.target_amps[i];
    OptimizationProblem pb = superposition_problem(
        target, cfg.n_units, 1.0, 0.01,
        std::max<long long>(1, cfg.budget / cfg.alpha2_grid.size()), cfg.seed);
    pb.n_starts = cfg.n_starts;
    pb.threads = cfg.threads;
    const auto rows = sweep(pb, SweepVariable::alpha_squared, cfg.alpha2_grid, true, true, logp);
    detail::CsvWriter csv(data_path, "alpha2,p0,p1,fidelity,purity,feasible,violation,evaluations");
    fs::create_directories(out / "specs");
    for (const auto& r : rows) {
      if (!r.ok) {
        csv.row(detail::fmt12(r.value) + ",error,,,,,,\"" + r.error + "\"");
        continue;
      }
      const auto& rep = r.result.best_report;
      csv.row(detail::fmt12(r.value) + "," + detail::fmt12(rep.p_at(0)) + "," +
              detail::fmt12(rep.p_at(1)) + "," + detail::fmt12_opt(rep.fidelity) + "," +
              detail::fmt12(rep.purity) + "," + (r.result.feasible ? "1" : "0") + "," +
              detail::fmt12(r.result.constraint_violation) + "," +
              std::to_string(r.result.evaluations_used));
      char tag[48];
      std::snprintf(tag, sizeof(tag), "a2_%.4g.nmzi", r.value);
      detail::write_spec(out / "specs" / tag, r.result.best_params, std::sqrt(r.value));
    }
    add_output(data_path);
  } else if (cfg.preset == "figS1") {
    // two-element filtration against input intensity: dark-point parameters
    // next to numerically optimized ones at two constraint levels
    detail::CsvWriter csv(data_path,
                          "alpha2,p1_cond,g2_cond,p1_t01,g2_t01,feas01,p1_t001,g2_t001,feas001");
    const SimpleNmziParams cond = optimal_simple_nmzi(cfg.kerr_phi);
    const long long per_point = std::max<long long>(1, cfg.budget / (2 * cfg.alpha2_grid.size()));
    for (double a2 : cfg.alpha2_grid) {
      const double a = std::sqrt(a2);
      const ObservableReport rc = make_report(run(simple_nmzi(cond), a, FockCutoff::for_alpha(a)));
      OptimizationResult r01 = optimize(
          simple_filtration_problem(a, cfg.kerr_phi, Constraint::tail(2, 0.01), per_point, cfg.seed),
          logp);
      OptimizationResult r001 = optimize(
          simple_filtration_problem(a, cfg.kerr_phi, Constraint::tail(2, 0.001), per_point, cfg.seed),
          logp);
      csv.row(detail::fmt12(a2) + "," + detail::fmt12(rc.p_at(1)) + "," + detail::fmt12_opt(rc.g2) +
              "," + detail::fmt12(r01.best_report.p_at(1)) + "," +
              detail::fmt12_opt(r01.best_report.g2) + "," + (r01.feasible ? "1" : "0") + "," +
              detail::fmt12(r001.best_report.p_at(1)) + "," + detail::fmt12_opt(r001.best_report.g2) +
              "," + (r001.feasible ? "1" : "0"));
    }
    add_output(data_path);
  } else if (cfg.preset == "figS2") {
    // dependence on the Kerr coefficient: (a) two-element filtration across
    // kerr_phi; (b) cascade chains across depth for a few kerr_phi values
    detail::CsvWriter csv(data_path, "panel,kerr_phi,alpha2,n_units,best_p1,feasible");
    const long long half = std::max<long long>(1, cfg.budget / 2);
    const long long per_a =
        std::max<long long>(1, half / (2 * std::max<std::size_t>(1, cfg.kerr_grid.size())));
    for (double a2 : {0.5, 1.0}) {
      for (double kerr : cfg.kerr_grid) {
        OptimizationResult r = optimize(
            simple_filtration_problem(std::sqrt(a2), kerr, Constraint::tail(2, 0.01), per_a, cfg.seed),
            logp);
        csv.row(std::string("a,") + detail::fmt12(kerr) + "," + detail::fmt12(a2) + ",2," +
                detail::fmt12(r.best_report.p_at(1)) + "," + (r.feasible ? "1" : "0"));
      }
    }
    const std::vector<double> kerr_b = {0.05, 0.1, 0.2};
    const long long per_b =
        std::max<long long>(1, half / static_cast<long long>(kerr_b.size() * cfg.n_grid.size()));
    for (double kerr : kerr_b) {
      OptimizationProblem pb =
          extraction_problem(2, 1, alpha, kerr, Constraint::tail(2, 0.01), per_b, cfg.seed);
      pb.warm_starts.push_back(simple_nmzi(optimal_simple_nmzi(kerr)));
      pb.n_starts = cfg.n_starts;
      pb.threads = cfg.threads;
      std::vector<double> grid(cfg.n_grid.begin(), cfg.n_grid.end());
      const auto rows = sweep(pb, SweepVariable::n_units, grid, true, true, logp);
      for (const auto& r : rows) {
        if (!r.ok) {
          csv.row(std::string("b,") + detail::fmt12(kerr) + "," + detail::fmt12(cfg.alpha2) + "," +
                  detail::fmt12(r.value) + ",error,\"" + r.error + "\"");
          continue;
        }
        csv.row(std::string("b,") + detail::fmt12(kerr) + "," + detail::fmt12(cfg.alpha2) + "," +
                detail::fmt12(r.value) + "," + detail::fmt12(r.result.best_report.p_at(1)) + "," +
                (r.result.feasible ? "1" : "0"));
      }
    }
    add_output(data_path);
  } else if (cfg.preset == "figS3" || cfg.preset == "figS4") {
    // robustness studies on a fixed optimized circuit
    CircuitSpec base;
    if (!cfg.elements.empty()) {
      base.elements = cfg.elements;
    } else {
      const OptimizationResult r = optimize_preset_base(cfg, logp);
      base = r.best_params;
      summary["base_p1"] = r.best_report.p_at(1);
      summary["base_feasible"] = r.feasible;
    }
    detail::write_spec(out / "base_spec.nmzi", base, alpha);
    add_output(out / "base_spec.nmzi");
    if (cfg.preset == "figS3") {
      OptimizationProblem pb;
      pb.objective = Objective::photon(1);
      pb.base = base;
      pb.free_mask = uniform_mask(base.size(), true, true, false);
      pb.alpha = alpha;
      pb.seed = cfg.seed;
      const auto rows = sweep(pb, SweepVariable::alpha_squared, cfg.alpha2_grid, false, false);
      detail::CsvWriter csv(data_path, "alpha2,p1");
      for (const auto& r : rows) {
        if (!r.ok) {
          csv.row(detail::fmt12(r.value) + ",error");
          continue;
        }
        csv.row(detail::fmt12(r.value) + "," + detail::fmt12(r.report.p_at(1)));
      }
      add_output(data_path);
    } else {
      PerturbationStudy st{base, cfg.magnitude, cfg.samples, cfg.seed};
      const PerturbationSummary s = perturbation_study(st, alpha, Objective::photon(1));
      detail::CsvWriter csv(data_path, "sample,p1");
      for (std::size_t i = 0; i < s.values.size(); ++i)
        csv.row(std::to_string(i) + "," + detail::fmt12(s.values[i]));
      add_output(data_path);
      summary["base_value"] = s.base_value;
      summary["mean"] = s.mean;
      summary["median"] = s.median;
      summary["min"] = s.min;
      summary["max"] = s.max;
      summary["histogram"] = s.histogram;
      summary["bin_lo"] = s.bin_lo;
      summary["bin_width"] = s.bin_width;
    }
  } else if (cfg.preset == "custom") {
    Objective obj;
    if (cfg.objective == "fidelity") {
      Eigen::VectorXcd target(cfg.target_amps.size());
      for (std::size_t i = 0; i < cfg.target_amps.size(); ++i) target(i) = cfg.target_amps[i];
      obj = Objective::fidelity_to(target);
    } else if (cfg.objective.size() >= 2 && cfg.objective[0] == 'p') {
      obj = Objective::photon(std::stoi(cfg.objective.substr(1)));
    } else {
      throw std::invalid_argument("custom: objective must be p<k> or fidelity");
    }
    OptimizationProblem pb;
    pb.objective = obj;
    if (cfg.constraint != "none") pb.constraints = {parse_constraint(cfg.constraint)};
    pb.base = cfg.elements.empty() ? uniform_spec(cfg.n_units, 0.0, 0.0, cfg.kerr_phi)
                                   : CircuitSpec{cfg.elements};
    pb.free_mask = uniform_mask(pb.base.size(), true, true, cfg.objective == "fidelity");
    pb.alpha = alpha;
    pb.budget = cfg.budget;
    pb.seed = cfg.seed;
    pb.n_starts = cfg.n_starts;
    pb.threads = cfg.threads;
    const OptimizationResult r = optimize(pb, logp);
    detail::CsvWriter csv(data_path, report_csv_header());
    csv.row(report_csv_row(r.best_report));
    add_output(data_path);
    detail::write_spec(out / "best_spec.nmzi", r.best_params, alpha);
    add_output(out / "best_spec.nmzi");
    summary["objective_value"] = r.objective_value;
    summary["feasible"] = r.feasible;
    summary["constraint_violation"] = r.constraint_violation;
    summary["evaluations_used"] = r.evaluations_used;
    if (!r.feasible) {
      outcome.exit_code = 2;
      outcome.message = "no feasible point found; best infeasible candidate written";
    }
  } else {
    throw std::invalid_argument("unknown preset '" + cfg.preset + "'");
  }

  if (logp) {
    detail::write_run_log(out / "run_log.csv", log);
    add_output(out / "run_log.csv");
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json manifest;
  manifest["preset"] = cfg.preset;
  manifest["seed"] = cfg.seed;
  manifest["config"] = config_to_json(cfg);
  manifest["versions"] = {{"nmzi", artifact_version}, {"circuit_format", circuit_format_version}};
  manifest["wall_time_s"] = wall;
  manifest["outputs"] = outcome.outputs;
  if (!summary.empty()) manifest["summary"] = summary;
  {
    std::ofstream mf(out / "manifest.json");
    mf << manifest.dump(2) << "\n";
  }
  outcome.outputs.push_back((out / "manifest.json").string());
  return outcome;
}

// Shared base optimization for the robustness presets: single-photon
// extraction with the configured cascade size.
inline OptimizationResult optimize_preset_base(const ExperimentConfig& cfg, RunLog* log) {
  const double alpha = std::sqrt(cfg.alpha2);
  OptimizationProblem pb = extraction_problem(2, 1, alpha, cfg.kerr_phi,
                                              parse_constraint(cfg.constraint),
                                              std::max<long long>(1, cfg.budget / 10), cfg.seed);
  pb.warm_starts.push_back(simple_nmzi(optimal_simple_nmzi(cfg.kerr_phi)));
  pb.n_starts = cfg.n_starts;
  pb.threads = cfg.threads;
  std::vector<double> grid;
  for (int n = 2; n <= cfg.n_units; n += 2) grid.push_back(n);
  if (grid.empty() || grid.back() != cfg.n_units) grid.push_back(cfg.n_units);
  const auto rows = sweep(pb, SweepVariable::n_units, grid, true, true, log);
  for (auto it = rows.rbegin(); it != rows.rend(); ++it)
    if (it->ok) return it->result;
  throw std::runtime_error("optimize_preset_base: every stage failed");
}

// ---------------------------------------------------------------------------
// Circuit file validation

struct ValidationReport {
  bool ok = false;
  bool roundtrip_identical = false;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  SavedCircuit circuit;
};

inline ValidationReport validate_spec(const std::string& path) {
  ValidationReport rep;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    rep.errors.push_back("cannot read '" + path + "'");
    return rep;
  }
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  try {
    rep.circuit = parse_circuit(text);
  } catch (const std::exception& e) {
    rep.errors.push_back(e.what());
    return rep;
  }
  rep.ok = true;
  rep.roundtrip_identical = serialize_circuit(rep.circuit) == text;
  if (!rep.roundtrip_identical)
    rep.warnings.push_back("file is not in canonical form; parse/serialize round trip differs");

  const double pi = std::numbers::pi;
  for (std::size_t i = 0; i < rep.circuit.spec.elements.size(); ++i) {
    const auto& e = rep.circuit.spec.elements[i];
    auto warn = [&](const std::string& what) {
      rep.warnings.push_back("element " + std::to_string(i + 1) + ": " + what);
    };
    if (!std::isfinite(e.theta) || !std::isfinite(e.linear_phi) || !std::isfinite(e.kerr_phi)) {
      rep.errors.push_back("element " + std::to_string(i + 1) + ": non-finite parameter");
      rep.ok = false;
      continue;
    }
    if (std::abs(e.theta) > pi) warn("theta outside the canonical range [-pi, pi]");
    if (std::abs(e.theta) > pi / 2) warn("theta outside the optimizer bounds [-pi/2, pi/2]");
    if (std::abs(e.linear_phi) > pi) warn("linear_phi outside the optimizer bounds [-pi, pi]");
    if (std::abs(e.kerr_phi) > pi / 2) warn("kerr_phi outside the optimizer bounds [-pi/2, pi/2]");
  }
  if (poisson_tail(std::norm(rep.circuit.alpha), rep.circuit.n_max) >= tail_tolerance)
    rep.warnings.push_back("n_max " + std::to_string(rep.circuit.n_max) +
                           " is inadequate for alpha; need >= " +
                           std::to_string(FockCutoff::for_alpha(rep.circuit.alpha).n_max));
  return rep;
}

// Re-evaluate a circuit file against a recorded observable row (the
// report_csv_header format).  The fidelity column is checked only when a
// target is supplied.
inline std::vector<std::string> check_recorded_report(const SavedCircuit& doc,
                                                      const std::string& csv_text, double tol,
                                                      const Eigen::VectorXcd* target = nullptr) {
  std::vector<std::string> errors;
  std::istringstream in(csv_text);
  std::string header, row;
  if (!std::getline(in, header) || !std::getline(in, row)) {
    errors.push_back("recorded report: expected a header and one data row");
    return errors;
  }
  if (detail::trim(header) != report_csv_header()) {
    errors.push_back("recorded report: unexpected header '" + header + "'");
    return errors;
  }
  std::vector<std::string> cells;
  std::istringstream rs(detail::trim(row));
  std::string cell;
  while (std::getline(rs, cell, ',')) cells.push_back(cell);
  if (cells.size() != 10) {
    errors.push_back("recorded report: expected 10 fields, got " + std::to_string(cells.size()));
    return errors;
  }

  const FockCutoff cutoff(doc.n_max);
  const ObservableReport fresh = make_report(run(doc.spec, doc.alpha, cutoff), target);
  const std::string fresh_row = report_csv_row(fresh);
  std::vector<std::string> fresh_cells;
  std::istringstream fs(fresh_row);
  while (std::getline(fs, cell, ',')) fresh_cells.push_back(cell);

  static const char* names[10] = {"n_max", "p0", "p1", "p2",       "p3",
                                  "p4",    "p_rest", "g2", "fidelity", "purity"};
  for (int i = 0; i < 10; ++i) {
    if (i == 8 && !target) continue;
    if (cells[i] == fresh_cells[i]) continue;
    if (cells[i] == "undefined" || fresh_cells[i] == "undefined") {
      errors.push_back(std::string(names[i]) + ": recorded '" + cells[i] + "' vs fresh '" +
                       fresh_cells[i] + "'");
      continue;
    }
    const double a = std::stod(cells[i]), b = std::stod(fresh_cells[i]);
    if (std::abs(a - b) > tol)
      errors.push_back(std::string(names[i]) + ": recorded " + cells[i] + " vs fresh " +
                       fresh_cells[i] + " (tol " + detail::fmt12(tol) + ")");
  }
  return errors;
}

}  // namespace nmzi
