#pragma once

// Experiment configuration and dispatch. One JSON document (versioned schema,
// unknown keys rejected) describes one experiment run; run() builds the mesh,
// material and load from it, executes the experiment, and writes its CSV
// tables, JSON summaries and a plain-text log under an isolated per-run
// directory. Data outputs are byte-reproducible for a fixed config and seed:
// wall-clock timing goes only to the log and the returned report, never into
// the CSV or summary files. The report's checks_pass flag carries the
// experiment's acceptance condition so callers can map it to an exit status.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "velab/disc.hpp"
#include "velab/energy.hpp"
#include "velab/fem.hpp"
#include "velab/linelast.hpp"
#include "velab/mesh.hpp"
#include "velab/nonlin.hpp"
#include "velab/tensor3.hpp"

namespace velab {

// Bumped whenever a config written for an older build would parse
// differently; configs must carry a matching "schema" field.
inline constexpr int kSchemaVersion = 1;
inline constexpr const char kVersion[] = "0.1.0";

namespace config_detail {
inline constexpr double kQuarterTurn = 1.5707963267948966;
}

struct DomainConfig {
  std::string shape = "cylinder";  // cylinder | disc | box
  int n_r = 6;                     // radial subdivisions (cylinder, disc)
  int n_theta = 12;                // angular subdivisions (cylinder, disc)
  int n_z = 3;                     // layers (cylinder)
  double grading = 2.0;            // radial grading exponent (cylinder, disc)
  int n = 8;                       // subdivisions per edge (box)
};

// The default material is the disc-problem normalization: shear stiffness 4
// and zero trace coefficient at the identity (Yeoh with c_vol = c1 / 3).
// Note this differs from the plain YeohParams defaults.
struct ModelConfig {
  std::string variant = "yeoh";  // yeoh | ogden
  YeohParams yeoh{2.0, 1.0, 1.0, 2.0 / 3.0};
  OgdenParams ogden;
};

struct LoadConfig {
  std::string builtin = "disc";  // disc | zero | constant
  double scale = 1.0;            // amplitude of the disc load
  Vec3 value = Vec3::Zero();     // constant body force (must be equilibrated)
};

struct SolverConfig {
  double tol = 1e-9;           // stationarity tolerance for nonlinear solves
  std::vector<double> h_list;  // strictly decreasing in (0,1); hsweep scales
  double h = 0.05;             // common scale for the branches experiment
  double m = 3.0;              // constraint-ball radius multiplier
  double c_omega = 1.0;        // domain constant, echoed into reports
  unsigned long long seed = 2026;
  int samples = 0;     // randomized sample count; 0 = per-experiment default
  int basis_size = 24;  // radial basis size for the disc-gap certificate
  std::vector<double> branch_angles = {config_detail::kQuarterTurn};
};

struct OutputConfig {
  std::string directory = "velab_out";
  std::string run_id;  // empty = "<experiment>-s<seed>"
};

struct ExperimentConfig {
  int schema = kSchemaVersion;
  std::string experiment = "assumptions";
  DomainConfig domain;
  ModelConfig model;
  LoadConfig load;
  SolverConfig solver;
  OutputConfig output;
};

struct ExperimentInfo {
  std::string name;
  std::string summary;
};

inline std::vector<ExperimentInfo> list_experiments() {
  return {
      {"assumptions", "randomized structural probes of the stored-energy model"},
      {"linear", "quadratic branch energies, energy identity, astatic load structure"},
      {"korn", "constrained Korn constant of the configured mesh"},
      {"hsweep", "rescaled constrained minima against the quadratic target as h decreases"},
      {"branches", "constrained minima across rotation branches at a common scale"},
      {"disc-gap", "two-branch gap certificate on the graded cylinder"},
  };
}

namespace config_detail {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::invalid_argument("config: " + msg);
}

inline void require_object(const json& node, const std::string& path) {
  if (!node.is_object()) fail(path + " must be an object");
}

// Strict key walk: anything outside the allowed set is a spelling mistake or
// a config for a different build, and silently ignoring it would change the
// run's meaning.
inline void reject_unknown(const json& node, const std::string& path,
                           std::initializer_list<const char*> allowed) {
  for (const auto& item : node.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) fail("unknown key '" + path + item.key() + "'");
  }
}

inline double get_double(const json& node, const std::string& path, const char* key,
                         double fallback) {
  if (!node.contains(key)) return fallback;
  const json& v = node.at(key);
  if (!v.is_number()) fail(path + key + " must be a number");
  return v.get<double>();
}

inline int get_int(const json& node, const std::string& path, const char* key, int fallback) {
  if (!node.contains(key)) return fallback;
  const json& v = node.at(key);
  if (!v.is_number_integer()) fail(path + key + " must be an integer");
  return v.get<int>();
}

inline std::string get_string(const json& node, const std::string& path, const char* key,
                              const std::string& fallback) {
  if (!node.contains(key)) return fallback;
  const json& v = node.at(key);
  if (!v.is_string()) fail(path + key + " must be a string");
  return v.get<std::string>();
}

inline std::vector<double> get_double_list(const json& node, const std::string& path,
                                           const char* key) {
  std::vector<double> out;
  if (!node.contains(key)) return out;
  const json& v = node.at(key);
  if (!v.is_array()) fail(path + key + " must be an array of numbers");
  for (const json& e : v) {
    if (!e.is_number()) fail(path + key + " must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

inline std::vector<OgdenTerm> get_term_list(const json& node, const std::string& path,
                                            const char* key) {
  std::vector<OgdenTerm> out;
  if (!node.contains(key)) return out;
  const json& v = node.at(key);
  if (!v.is_array()) fail(path + key + " must be an array of [coeff, exponent] pairs");
  for (const json& e : v) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
      fail(path + key + " must be an array of [coeff, exponent] pairs");
    }
    out.push_back(OgdenTerm{e[0].get<double>(), e[1].get<double>()});
  }
  return out;
}

}  // namespace config_detail

// Parse a config document: types and key sets are enforced here, cross-field
// semantics in validate(). Defaults fill every omitted block.
inline ExperimentConfig parse_config(const nlohmann::json& root) {
  using config_detail::fail;
  using config_detail::get_double;
  using config_detail::get_double_list;
  using config_detail::get_int;
  using config_detail::get_string;
  using config_detail::get_term_list;
  using config_detail::reject_unknown;
  using config_detail::require_object;

  require_object(root, "document root");
  reject_unknown(root, "",
                 {"schema", "experiment", "domain", "model", "load", "solver", "output"});
  if (!root.contains("schema")) fail("missing required key 'schema'");
  if (!root.at("schema").is_number_integer()) fail("schema must be an integer");
  if (!root.contains("experiment")) fail("missing required key 'experiment'");
  if (!root.at("experiment").is_string()) fail("experiment must be a string");

  ExperimentConfig cfg;
  cfg.schema = root.at("schema").get<int>();
  cfg.experiment = root.at("experiment").get<std::string>();

  if (root.contains("domain")) {
    const nlohmann::json& d = root.at("domain");
    require_object(d, "domain");
    reject_unknown(d, "domain.", {"shape", "n_r", "n_theta", "n_z", "grading", "n"});
    cfg.domain.shape = get_string(d, "domain.", "shape", cfg.domain.shape);
    cfg.domain.n_r = get_int(d, "domain.", "n_r", cfg.domain.n_r);
    cfg.domain.n_theta = get_int(d, "domain.", "n_theta", cfg.domain.n_theta);
    cfg.domain.n_z = get_int(d, "domain.", "n_z", cfg.domain.n_z);
    cfg.domain.grading = get_double(d, "domain.", "grading", cfg.domain.grading);
    cfg.domain.n = get_int(d, "domain.", "n", cfg.domain.n);
  }

  if (root.contains("model")) {
    const nlohmann::json& m = root.at("model");
    require_object(m, "model");
    cfg.model.variant = get_string(m, "model.", "variant", cfg.model.variant);
    if (cfg.model.variant == "yeoh") {
      reject_unknown(m, "model.", {"variant", "c1", "c2", "c3", "c_vol"});
      cfg.model.yeoh.c1 = get_double(m, "model.", "c1", cfg.model.yeoh.c1);
      cfg.model.yeoh.c2 = get_double(m, "model.", "c2", cfg.model.yeoh.c2);
      cfg.model.yeoh.c3 = get_double(m, "model.", "c3", cfg.model.yeoh.c3);
      cfg.model.yeoh.c_vol = get_double(m, "model.", "c_vol", cfg.model.yeoh.c_vol);
    } else if (cfg.model.variant == "ogden") {
      reject_unknown(m, "model.", {"variant", "principal", "cofactor", "c_vol"});
      cfg.model.ogden.principal = get_term_list(m, "model.", "principal");
      cfg.model.ogden.cofactor = get_term_list(m, "model.", "cofactor");
      cfg.model.ogden.c_vol = get_double(m, "model.", "c_vol", cfg.model.ogden.c_vol);
    } else {
      fail("model.variant must be \"yeoh\" or \"ogden\"");
    }
  }

  if (root.contains("load")) {
    const nlohmann::json& l = root.at("load");
    require_object(l, "load");
    cfg.load.builtin = get_string(l, "load.", "builtin", cfg.load.builtin);
    if (cfg.load.builtin == "disc") {
      reject_unknown(l, "load.", {"builtin", "scale"});
      cfg.load.scale = get_double(l, "load.", "scale", cfg.load.scale);
    } else if (cfg.load.builtin == "zero") {
      reject_unknown(l, "load.", {"builtin"});
    } else if (cfg.load.builtin == "constant") {
      reject_unknown(l, "load.", {"builtin", "value"});
      const std::vector<double> v = config_detail::get_double_list(l, "load.", "value");
      if (!l.contains("value")) fail("load.value is required for the constant load");
      if (v.size() != 3) fail("load.value must be an array of three numbers");
      cfg.load.value = Vec3(v[0], v[1], v[2]);
    } else {
      fail("load.builtin must be \"disc\", \"zero\" or \"constant\"");
    }
  }

  if (root.contains("solver")) {
    const nlohmann::json& s = root.at("solver");
    require_object(s, "solver");
    reject_unknown(s, "solver.",
                   {"tol", "h_list", "h", "m", "c_omega", "seed", "samples", "basis_size",
                    "branch_angles"});
    cfg.solver.tol = get_double(s, "solver.", "tol", cfg.solver.tol);
    if (s.contains("h_list")) cfg.solver.h_list = get_double_list(s, "solver.", "h_list");
    cfg.solver.h = get_double(s, "solver.", "h", cfg.solver.h);
    cfg.solver.m = get_double(s, "solver.", "m", cfg.solver.m);
    cfg.solver.c_omega = get_double(s, "solver.", "c_omega", cfg.solver.c_omega);
    if (s.contains("seed")) {
      const nlohmann::json& v = s.at("seed");
      if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0)) {
        fail("solver.seed must be a nonnegative integer");
      }
      cfg.solver.seed = v.get<unsigned long long>();
    }
    cfg.solver.samples = get_int(s, "solver.", "samples", cfg.solver.samples);
    cfg.solver.basis_size = get_int(s, "solver.", "basis_size", cfg.solver.basis_size);
    if (s.contains("branch_angles")) {
      cfg.solver.branch_angles = get_double_list(s, "solver.", "branch_angles");
    }
  }

  if (root.contains("output")) {
    const nlohmann::json& o = root.at("output");
    require_object(o, "output");
    reject_unknown(o, "output.", {"directory", "run_id"});
    cfg.output.directory = get_string(o, "output.", "directory", cfg.output.directory);
    cfg.output.run_id = get_string(o, "output.", "run_id", cfg.output.run_id);
  }

  return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_detail::fail("cannot open '" + path + "'");
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    config_detail::fail("'" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(root);
}

inline EnergyModel make_model(const ModelConfig& m) {
  if (m.variant == "yeoh") return EnergyModel::yeoh(m.yeoh);
  if (m.variant == "ogden") return EnergyModel::ogden(m.ogden);
  config_detail::fail("model.variant must be \"yeoh\" or \"ogden\"");
}

inline Mesh make_mesh(const DomainConfig& d) {
  if (d.shape == "cylinder") return build_cylinder_mesh(d.n_r, d.n_theta, d.n_z, d.grading);
  if (d.shape == "disc") return build_disc_mesh(d.n_r, d.n_theta, d.grading);
  if (d.shape == "box") return build_box_mesh(d.n);
  config_detail::fail("domain.shape must be \"cylinder\", \"disc\" or \"box\"");
}

inline LoadFunctional make_load(const LoadConfig& l) {
  if (l.builtin == "disc") return disc_body_load(l.scale);
  if (l.builtin == "zero") return LoadFunctional::zero();
  if (l.builtin == "constant") {
    const Vec3 v = l.value;
    return LoadFunctional::body_force([v](const Vec3&) { return v; });
  }
  config_detail::fail("load.builtin must be \"disc\", \"zero\" or \"constant\"");
}

// Cross-field semantics, with one named diagnostic per violation. Configs
// built programmatically pass through the same gate as parsed ones.
inline void validate(const ExperimentConfig& cfg) {
  using config_detail::fail;

  if (cfg.schema != kSchemaVersion) {
    fail("unsupported schema version " + std::to_string(cfg.schema) + " (this build reads " +
         std::to_string(kSchemaVersion) + ")");
  }

  bool known_experiment = false;
  std::string known_names;
  for (const ExperimentInfo& info : list_experiments()) {
    if (info.name == cfg.experiment) known_experiment = true;
    known_names += known_names.empty() ? info.name : ", " + info.name;
  }
  if (!known_experiment) {
    fail("unknown experiment '" + cfg.experiment + "' (known: " + known_names + ")");
  }

  if (cfg.domain.shape != "cylinder" && cfg.domain.shape != "disc" &&
      cfg.domain.shape != "box") {
    fail("domain.shape must be \"cylinder\", \"disc\" or \"box\"");
  }
  if (cfg.domain.shape == "box") {
    if (cfg.domain.n < 1) fail("domain.n must be at least 1");
  } else {
    if (cfg.domain.n_r < 2) fail("domain.n_r must be at least 2");
    if (cfg.domain.n_theta < 2) fail("domain.n_theta must be at least 2");
    if (!(cfg.domain.grading >= 1.0)) fail("domain.grading must be at least 1");
    if (cfg.domain.shape == "cylinder" && cfg.domain.n_z < 2) {
      fail("domain.n_z must be at least 2");
    }
  }

  (void)make_model(cfg.model);  // coefficient gates live with the model

  if (cfg.load.builtin != "disc" && cfg.load.builtin != "zero" &&
      cfg.load.builtin != "constant") {
    fail("load.builtin must be \"disc\", \"zero\" or \"constant\"");
  }
  if (!std::isfinite(cfg.load.scale)) fail("load.scale must be finite");
  if (cfg.load.builtin == "disc" && cfg.domain.shape == "box") {
    fail("the disc load needs a cylinder or disc domain");
  }

  const SolverConfig& s = cfg.solver;
  if (!(s.tol > 0.0) || !std::isfinite(s.tol)) fail("solver.tol must be a positive number");
  if (!(s.m > 0.0) || !std::isfinite(s.m)) fail("solver.m must be a positive number");
  if (!(s.c_omega > 0.0) || !std::isfinite(s.c_omega)) {
    fail("solver.c_omega must be a positive number");
  }
  if (!(s.h > 0.0 && s.h < 1.0)) fail("solver.h must lie in (0,1)");
  if (s.samples < 0) fail("solver.samples must be nonnegative");
  if (s.basis_size < 1) fail("solver.basis_size must be at least 1");
  for (size_t k = 0; k < s.h_list.size(); ++k) {
    if (!(s.h_list[k] > 0.0 && s.h_list[k] < 1.0)) {
      fail("solver.h_list values must lie in (0,1)");
    }
    if (k > 0 && s.h_list[k] >= s.h_list[k - 1]) {
      fail("solver.h_list must be strictly decreasing (duplicate h rejected)");
    }
  }
  for (const double a : s.branch_angles) {
    if (!std::isfinite(a)) fail("solver.branch_angles must be finite");
  }

  if (cfg.experiment == "hsweep" && s.h_list.empty()) {
    fail("experiment 'hsweep' requires solver.h_list");
  }
  if (cfg.experiment == "branches" && s.branch_angles.empty()) {
    fail("experiment 'branches' requires solver.branch_angles");
  }
  if (cfg.experiment == "disc-gap") {
    if (cfg.domain.shape != "cylinder") {
      fail("experiment 'disc-gap' requires domain.shape \"cylinder\"");
    }
    if (cfg.load.builtin != "disc") {
      fail("experiment 'disc-gap' requires the disc load");
    }
    const EnergyModel model = make_model(cfg.model);
    const double shear = shear_stiffness_at_identity(model);
    const double trace = trace_coefficient_at_identity(model);
    if (std::abs(shear - 4.0) > 1e-10 || std::abs(trace) > 1e-10) {
      char msg[192];
      std::snprintf(msg, sizeof msg,
                    "experiment 'disc-gap' requires shear stiffness 4 and zero trace "
                    "coefficient at the identity (Yeoh: c1 = 2, c_vol = c1/3); got "
                    "shear %.17g, trace %.17g",
                    shear, trace);
      fail(msg);
    }
  }

  const std::string& id = cfg.output.run_id;
  if (!id.empty()) {
    bool has_regular = false;
    for (const char c : id) {
      const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
      if (!ok) fail("output.run_id may use only letters, digits, '.', '_' and '-'");
      if (c != '.') has_regular = true;
    }
    if (!has_regular) fail("output.run_id must contain a character other than '.'");
  }
}

// Effective configuration with every default materialized, as written into
// the summary file. Key order is alphabetical (nlohmann object ordering), so
// the echo is byte-stable.
inline nlohmann::json config_echo(const ExperimentConfig& cfg) {
  nlohmann::json root;
  root["schema"] = cfg.schema;
  root["experiment"] = cfg.experiment;

  nlohmann::json d;
  d["shape"] = cfg.domain.shape;
  if (cfg.domain.shape == "box") {
    d["n"] = cfg.domain.n;
  } else {
    d["n_r"] = cfg.domain.n_r;
    d["n_theta"] = cfg.domain.n_theta;
    d["grading"] = cfg.domain.grading;
    if (cfg.domain.shape == "cylinder") d["n_z"] = cfg.domain.n_z;
  }
  root["domain"] = d;

  nlohmann::json m;
  m["variant"] = cfg.model.variant;
  if (cfg.model.variant == "yeoh") {
    m["c1"] = cfg.model.yeoh.c1;
    m["c2"] = cfg.model.yeoh.c2;
    m["c3"] = cfg.model.yeoh.c3;
    m["c_vol"] = cfg.model.yeoh.c_vol;
  } else {
    nlohmann::json principal = nlohmann::json::array();
    for (const OgdenTerm& t : cfg.model.ogden.principal) {
      principal.push_back({t.coeff, t.exponent});
    }
    nlohmann::json cofactor = nlohmann::json::array();
    for (const OgdenTerm& t : cfg.model.ogden.cofactor) {
      cofactor.push_back({t.coeff, t.exponent});
    }
    m["principal"] = principal;
    m["cofactor"] = cofactor;
    m["c_vol"] = cfg.model.ogden.c_vol;
  }
  root["model"] = m;

  nlohmann::json l;
  l["builtin"] = cfg.load.builtin;
  if (cfg.load.builtin == "disc") l["scale"] = cfg.load.scale;
  if (cfg.load.builtin == "constant") {
    l["value"] = {cfg.load.value.x(), cfg.load.value.y(), cfg.load.value.z()};
  }
  root["load"] = l;

  nlohmann::json s;
  s["tol"] = cfg.solver.tol;
  if (!cfg.solver.h_list.empty()) s["h_list"] = cfg.solver.h_list;
  s["h"] = cfg.solver.h;
  s["m"] = cfg.solver.m;
  s["c_omega"] = cfg.solver.c_omega;
  s["seed"] = cfg.solver.seed;
  s["samples"] = cfg.solver.samples;
  s["basis_size"] = cfg.solver.basis_size;
  s["branch_angles"] = cfg.solver.branch_angles;
  root["solver"] = s;

  nlohmann::json o;
  o["directory"] = cfg.output.directory;
  o["run_id"] = cfg.output.run_id.empty()
                    ? cfg.experiment + "-s" + std::to_string(cfg.solver.seed)
                    : cfg.output.run_id;
  root["output"] = o;
  return root;
}

struct RunReport {
  std::string experiment;
  std::string run_id;
  std::string out_dir;  // directory holding this run's outputs
  std::vector<std::string> csv_paths;
  std::vector<std::string> json_paths;  // data JSON files beside the summary
  std::string summary_path;
  std::string log_path;
  double wall_seconds = 0.0;
  bool checks_pass = false;
  nlohmann::json summary;
};

namespace config_detail {

struct RunContext {
  std::filesystem::path dir;
  std::vector<std::string> csv_paths;
  std::vector<std::string> json_paths;
  std::ofstream log;

  std::vector<std::string> csv_names;
  std::vector<std::string> json_names;

  std::ofstream open_output(const std::string& name, bool is_csv) {
    const std::filesystem::path p = dir / name;
    std::ofstream out(p);
    if (!out) throw std::runtime_error("run: cannot write '" + p.string() + "'");
    (is_csv ? csv_paths : json_paths).push_back(p.string());
    (is_csv ? csv_names : json_names).push_back(name);
    log << "wrote " << p.string() << "\n";
    return out;
  }
};

inline int default_samples(const ExperimentConfig& cfg, int fallback) {
  return cfg.solver.samples > 0 ? cfg.solver.samples : fallback;
}

inline json run_assumptions(const ExperimentConfig& cfg, RunContext& ctx, bool& pass) {
  const EnergyModel model = make_model(cfg.model);
  const int samples = default_samples(cfg, 2000);
  const ProbeReport rep = probe_assumptions(model, samples, cfg.solver.seed);

  std::ofstream csv = ctx.open_output("assumptions.csv", true);
  csv << "frame_violation,rotation_energy,coercivity,growth_constant,growth_offset,"
         "growth_s,growth_q,growth_r,det_blowup_monotone,min_at_rotations\n";
  char buf[320];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d\n",
                rep.max_frame_violation, rep.max_rotation_energy, rep.coercivity_constant,
                rep.growth_constant, rep.growth_offset, rep.growth_s, rep.growth_q,
                rep.growth_r, rep.det_blowup_monotone ? 1 : 0, rep.min_at_rotations ? 1 : 0);
  csv << buf;

  json results;
  results["samples"] = samples;
  results["max_frame_violation"] = rep.max_frame_violation;
  results["max_rotation_energy"] = rep.max_rotation_energy;
  results["coercivity_constant"] = rep.coercivity_constant;
  results["growth"] = {{"constant", rep.growth_constant},
                       {"offset", rep.growth_offset},
                       {"exponents", {rep.growth_s, rep.growth_q, rep.growth_r}}};
  results["det_blowup_monotone"] = rep.det_blowup_monotone;
  results["min_at_rotations"] = rep.min_at_rotations;
  results["pass_frame"] = rep.pass_frame;
  results["pass_coercivity"] = rep.pass_coercivity;
  pass = rep.all_pass();
  ctx.log << "probes " << (pass ? "pass" : "FAIL") << " over " << samples << " samples\n";
  return results;
}

inline json run_linear(const ExperimentConfig& cfg, RunContext& ctx, bool& pass) {
  const Mesh mesh = make_mesh(cfg.domain);
  const EnergyModel model = make_model(cfg.model);
  const LoadFunctional load = make_load(cfg.load);
  const int samples = default_samples(cfg, 50);

  const LinearElasticSystem system(mesh, model);
  const LinearSolveReport base = system.solve(load);

  std::vector<std::pair<Rot3, double>> rows;
  std::vector<double> residuals;
  std::vector<Rot3> rotations;
  rows.emplace_back(Rot3::identity(), base.energy);
  residuals.push_back(base.identity_residual);
  rotations.push_back(Rot3::identity());

  std::mt19937_64 gen(cfg.solver.seed);
  double beta_min = base.energy;
  double beta_max = base.energy;
  double worst_residual = base.identity_residual;
  for (int k = 0; k < samples; ++k) {
    const Rot3 r = detail::random_rotation(gen);
    const LinearSolveReport sol = system.solve(rotate_load(r, load));
    rows.emplace_back(r, sol.energy);
    residuals.push_back(sol.identity_residual);
    rotations.push_back(r);
    beta_min = std::min(beta_min, sol.energy);
    beta_max = std::max(beta_max, sol.energy);
    worst_residual = std::max(worst_residual, sol.identity_residual);
  }

  std::ofstream beta_csv = ctx.open_output("beta.csv", true);
  write_beta_csv(beta_csv, rows);
  std::ofstream res_json = ctx.open_output("identity_residuals.json", false);
  write_identity_residuals_json(res_json, residuals);

  const AstaticReport astatic = astatic_and_axes(load, mesh);
  const std::vector<Rot3> kernel = rotation_kernel_scan(load, mesh, rotations);

  json results;
  results["beta_identity"] = base.energy;
  results["beta_min"] = beta_min;
  results["beta_max"] = beta_max;
  results["worst_identity_residual"] = worst_residual;
  results["astatic"] = {
      {"max_abs_entry", astatic.k.cwiseAbs().maxCoeff()},
      {"eigenvalues", {astatic.eigenvalues(0), astatic.eigenvalues(1), astatic.eigenvalues(2)}},
      {"axis_free", astatic.axis_free},
      {"tolerance", astatic.tolerance}};
  results["rotation_kernel"] = {{"samples", static_cast<int>(rotations.size())},
                                {"members", static_cast<int>(kernel.size())}};
  pass = worst_residual <= 1e-10;
  ctx.log << "beta range [" << beta_min << ", " << beta_max << "], worst identity residual "
          << worst_residual << "\n";
  return results;
}

inline json run_korn(const ExperimentConfig& cfg, RunContext& ctx, bool& pass) {
  const Mesh mesh = make_mesh(cfg.domain);
  const double z = korn_constant_estimate(mesh);

  std::ofstream csv = ctx.open_output("korn.csv", true);
  csv << "shape,vertices,cells,korn_z\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s,%d,%d,%.17g\n", cfg.domain.shape.c_str(),
                static_cast<int>(mesh.vertices.size()), mesh.n_cells(), z);
  csv << buf;

  json results;
  results["korn_z"] = z;
  results["vertices"] = static_cast<int>(mesh.vertices.size());
  results["cells"] = mesh.n_cells();
  pass = std::isfinite(z) && z >= 1.0;
  ctx.log << "korn constant " << z << "\n";
  return results;
}

inline json run_hsweep(const ExperimentConfig& cfg, RunContext& ctx, bool& pass) {
  const Mesh mesh = make_mesh(cfg.domain);
  const EnergyModel model = make_model(cfg.model);
  const LoadFunctional load = make_load(cfg.load);
  NonlinOptions opts;
  opts.tol = cfg.solver.tol;

  const SweepTable table =
      h_sweep(mesh, model, load, Rot3::identity(), cfg.solver.h_list, cfg.solver.m, opts);
  std::ofstream csv = ctx.open_output("sweep.csv", true);
  write_sweep_csv(csv, table);

  json rows = json::array();
  double worst_abs = 0.0;
  for (const SweepRow& r : table.rows) {
    rows.push_back({{"h", r.h},
                    {"rescaled", r.rescaled},
                    {"ball_usage", r.ball_usage},
                    {"stationarity", r.stationarity},
                    {"iterations", r.iterations}});
    worst_abs = std::max(worst_abs, std::abs(r.rescaled));
  }

  json results;
  results["target"] = table.target;
  results["complete"] = table.complete;
  if (!table.failure.empty()) results["failure"] = table.failure;
  results["largest_h_ball_active"] = table.largest_h_ball_active;
  results["rows"] = rows;

  pass = table.complete;
  if (pass && !table.rows.empty()) {
    if (std::abs(table.target) > 1e-14) {
      const double final_rel =
          std::abs(table.rows.back().rescaled - table.target) / std::abs(table.target);
      results["final_rel_gap"] = final_rel;
      pass = final_rel <= 0.10;
    } else {
      results["final_rel_gap"] = worst_abs;
      pass = worst_abs <= 1e-10;
    }
  }
  ctx.log << "target " << table.target << ", " << table.rows.size() << " rows, complete="
          << (table.complete ? "yes" : "no") << "\n";
  return results;
}

inline json run_branches(const ExperimentConfig& cfg, RunContext& ctx, bool& pass) {
  const Mesh mesh = make_mesh(cfg.domain);
  const EnergyModel model = make_model(cfg.model);
  const LoadFunctional load = make_load(cfg.load);
  NonlinOptions opts;
  opts.tol = cfg.solver.tol;

  std::vector<Rot3> rotations = {Rot3::identity()};
  for (const double a : cfg.solver.branch_angles) {
    rotations.push_back(euler_rodrigues(Vec3(0.0, 0.0, 1.0), a));
  }

  const BranchTable table =
      multi_branch(mesh, model, load, rotations, cfg.solver.h, cfg.solver.m, opts);
  std::ofstream csv = ctx.open_output("branches.csv", true);
  write_branch_csv(csv, table);

  json rows = json::array();
  for (const BranchRow& r : table.rows) {
    rows.push_back({{"beta", r.beta}, {"rescaled", r.rescaled}});
  }

  // Each branch pair must order its constrained minima the same way as its
  // quadratic levels.
  bool sign_consistent = true;
  for (size_t i = 0; i < table.rows.size(); ++i) {
    for (size_t j = i + 1; j < table.rows.size(); ++j) {
      const double db = table.rows[i].beta - table.rows[j].beta;
      const double dr = table.rows[i].rescaled - table.rows[j].rescaled;
      if (std::abs(db) > 1e-14 && db * dr <= 0.0) sign_consistent = false;
    }
  }

  json results;
  results["rows"] = rows;
  results["min_beta_gap"] = table.min_beta_gap;
  results["distinct_levels"] = table.distinct_levels;
  results["sign_consistent"] = sign_consistent;
  pass = table.distinct_levels && sign_consistent;
  ctx.log << table.rows.size() << " branches, min quadratic gap " << table.min_beta_gap
          << ", distinct=" << (table.distinct_levels ? "yes" : "no") << "\n";
  return results;
}

inline json run_disc_gap(const ExperimentConfig& cfg, RunContext& ctx, bool& pass) {
  const Mesh mesh = make_mesh(cfg.domain);
  const EnergyModel model = make_model(cfg.model);
  const GapCertificate cert =
      certify_gap(mesh, model, cfg.solver.basis_size, cfg.load.scale);

  std::ofstream cert_json = ctx.open_output("certificate.json", false);
  write_certificate_json(cert_json, cert);
  std::vector<double> grid;
  for (int i = 1; i <= 100; ++i) grid.push_back(i / 100.0);
  std::ofstream profile_csv = ctx.open_output("profiles.csv", true);
  write_profile_csv(profile_csv, grid);

  json links = json::array();
  for (const GapLink* link : {&cert.link_a, &cert.link_b, &cert.link_c, &cert.link_d}) {
    links.push_back({{"name", link->name},
                     {"lower", link->lower},
                     {"upper", link->upper},
                     {"margin", link->margin},
                     {"pass", link->pass}});
  }

  json results;
  results["gap"] = cert.gap;
  results["beta_identity"] = cert.beta_identity;
  results["beta_rotated"] = cert.beta_rotated;
  results["reduced_j_min"] = cert.reduced_j_min;
  results["reduced_jplus_min"] = cert.reduced_jplus_min;
  results["w_fit_margin"] = cert.w_fit_margin;
  results["links"] = links;
  results["degenerate"] = cert.degenerate;
  results["basis_dofs"] = cert.basis_dofs;
  pass = cert.pass;
  ctx.log << "gap " << cert.gap << " (identity " << cert.beta_identity << ", rotated "
          << cert.beta_rotated << ")\n";
  return results;
}

}  // namespace config_detail

// Validate, dispatch, and write every output of one experiment run. Throws
// std::invalid_argument for config problems and propagates solver failures;
// a finished run reports its acceptance condition in checks_pass.
inline RunReport run(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();

  RunReport rep;
  rep.experiment = cfg.experiment;
  rep.run_id = cfg.output.run_id.empty()
                   ? cfg.experiment + "-s" + std::to_string(cfg.solver.seed)
                   : cfg.output.run_id;

  config_detail::RunContext ctx;
  ctx.dir = std::filesystem::path(cfg.output.directory) / rep.run_id;
  std::error_code ec;
  std::filesystem::create_directories(ctx.dir, ec);
  if (ec) {
    throw std::runtime_error("run: cannot create '" + ctx.dir.string() +
                             "': " + ec.message());
  }
  rep.out_dir = ctx.dir.string();

  const std::filesystem::path log_path = ctx.dir / "run.log";
  ctx.log.open(log_path);
  if (!ctx.log) throw std::runtime_error("run: cannot write '" + log_path.string() + "'");
  rep.log_path = log_path.string();
  ctx.log << "velab " << kVersion << " experiment=" << cfg.experiment
          << " run_id=" << rep.run_id << " seed=" << cfg.solver.seed << "\n";

  nlohmann::json results;
  bool pass = false;
  if (cfg.experiment == "assumptions") {
    results = config_detail::run_assumptions(cfg, ctx, pass);
  } else if (cfg.experiment == "linear") {
    results = config_detail::run_linear(cfg, ctx, pass);
  } else if (cfg.experiment == "korn") {
    results = config_detail::run_korn(cfg, ctx, pass);
  } else if (cfg.experiment == "hsweep") {
    results = config_detail::run_hsweep(cfg, ctx, pass);
  } else if (cfg.experiment == "branches") {
    results = config_detail::run_branches(cfg, ctx, pass);
  } else {
    results = config_detail::run_disc_gap(cfg, ctx, pass);
  }

  rep.summary["version"] = kVersion;
  rep.summary["experiment"] = cfg.experiment;
  rep.summary["run_id"] = rep.run_id;
  rep.summary["config"] = config_echo(cfg);
  rep.summary["results"] = results;
  rep.summary["checks_pass"] = pass;
  {
    // File names only: the summary's bytes then depend on the config and
    // seed alone, not on where the run directory happens to live.
    nlohmann::json outputs;
    outputs["csv"] = ctx.csv_names;
    outputs["json"] = ctx.json_names;
    rep.summary["outputs"] = outputs;
  }

  const std::filesystem::path summary_path = ctx.dir / "summary.json";
  {
    std::ofstream out(summary_path);
    if (!out) {
      throw std::runtime_error("run: cannot write '" + summary_path.string() + "'");
    }
    out << rep.summary.dump(2) << "\n";
  }
  rep.summary_path = summary_path.string();
  rep.csv_paths = ctx.csv_paths;
  rep.json_paths = ctx.json_paths;
  rep.checks_pass = pass;
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ctx.log << "wall_seconds " << rep.wall_seconds << "\n";
  ctx.log << "checks " << (pass ? "PASS" : "FAIL") << "\n";
  return rep;
}

}  // namespace velab
