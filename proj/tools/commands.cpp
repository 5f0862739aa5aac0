#include "commands.hpp"

#include "CLI11.hpp"
#include "nlsctl/errors.hpp"
#include "nlsctl/nonlinear.hpp"
#include "nlsctl/spectrum.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

#ifndef NLSCTL_VERSION
#define NLSCTL_VERSION "0.0.0"
#endif

namespace nlsctl::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kCommands = {"groundstate", "spectrum", "observability", "control", "steer", "sweep"};

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - start_).count();
    start_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

Interval omega_prime(const RunConfig& c) { return {c.a, c.b}; }

double sup_abs(const Field& f) { return f.cwiseAbs().maxCoeff(); }

int stride(const RunConfig& c) { return c.trajectory_stride > 0 ? c.trajectory_stride : std::max(1, c.nt / 64); }

bool strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

bool nondecreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] >= v[i - 1])) return false;
  return true;
}

HumProblem hum_problem(const RunConfig& c, const Grid& grid) {
  const BoundState bs = bound_state(c.mu, 0, grid);
  HumProblem p;
  p.sys = assemble(bs, omega_prime(c));
  p.T = c.T;
  p.nt = c.nt;
  p.cg_tol = c.cg_tol;
  p.cg_max_iters = c.cg_max_iters;
  return p;
}

}  // namespace

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  std::string token;
  if (const auto tail = text.find_last_not_of(" \t"); tail != std::string::npos && text[tail] == ',')
    throw UsageError("empty entry in value list '" + text + "'");
  std::istringstream in(text);
  while (std::getline(in, token, ',')) {
    const auto first = token.find_first_not_of(" \t");
    if (first == std::string::npos) throw UsageError("empty entry in value list '" + text + "'");
    const auto last = token.find_last_not_of(" \t");
    token = token.substr(first, last - first + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size()) throw UsageError("not a number in value list: '" + token + "'");
    values.push_back(v);
  }
  if (values.empty()) throw UsageError("empty value list");
  return values;
}

json to_json(const RunConfig& c) {
  return json{{"command", c.command},
              {"mu", c.mu},
              {"j", c.j},
              {"T", c.T},
              {"a", c.a},
              {"b", c.b},
              {"n", c.n},
              {"nt", c.nt},
              {"modes", c.modes},
              {"probes", c.probes},
              {"probe_modes", c.probe_modes},
              {"target_modes", c.target_modes},
              {"manufactured", c.manufactured},
              {"cg_tol", c.cg_tol},
              {"cg_max_iters", c.cg_max_iters},
              {"newton_tol", c.newton_tol},
              {"newton_max_iters", c.newton_max_iters},
              {"delta", c.delta},
              {"seed", c.seed},
              {"param", c.param},
              {"values", c.values},
              {"jobs", c.jobs},
              {"trajectory_stride", c.trajectory_stride},
              {"output_dir", c.output_dir}};
}

void merge_json(RunConfig& c, const json& j) {
  require(j.is_object(), "config file must hold a JSON object");
  const std::map<std::string, std::function<void(const json&)>> setters = {
      {"command", [&](const json& v) { c.command = v.get<std::string>(); }},
      {"mu", [&](const json& v) { c.mu = v.get<double>(); }},
      {"j", [&](const json& v) { c.j = v.get<int>(); }},
      {"T", [&](const json& v) { c.T = v.get<double>(); }},
      {"a", [&](const json& v) { c.a = v.get<double>(); }},
      {"b", [&](const json& v) { c.b = v.get<double>(); }},
      {"n", [&](const json& v) { c.n = v.get<int>(); }},
      {"nt", [&](const json& v) { c.nt = v.get<int>(); }},
      {"modes", [&](const json& v) { c.modes = v.get<int>(); }},
      {"probes", [&](const json& v) { c.probes = v.get<int>(); }},
      {"probe_modes", [&](const json& v) { c.probe_modes = v.get<int>(); }},
      {"target_modes", [&](const json& v) { c.target_modes = v.get<int>(); }},
      {"manufactured", [&](const json& v) { c.manufactured = v.get<bool>(); }},
      {"cg_tol", [&](const json& v) { c.cg_tol = v.get<double>(); }},
      {"cg_max_iters", [&](const json& v) { c.cg_max_iters = v.get<int>(); }},
      {"newton_tol", [&](const json& v) { c.newton_tol = v.get<double>(); }},
      {"newton_max_iters", [&](const json& v) { c.newton_max_iters = v.get<int>(); }},
      {"delta", [&](const json& v) { c.delta = v.get<double>(); }},
      {"seed", [&](const json& v) { c.seed = v.get<std::uint64_t>(); }},
      {"param", [&](const json& v) { c.param = v.get<std::string>(); }},
      {"values", [&](const json& v) { c.values = v.get<std::vector<double>>(); }},
      {"jobs", [&](const json& v) { c.jobs = v.get<int>(); }},
      {"trajectory_stride", [&](const json& v) { c.trajectory_stride = v.get<int>(); }},
      {"output_dir", [&](const json& v) { c.output_dir = v.get<std::string>(); }},
  };
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    require(it != setters.end(), "unknown config key '" + key + "'");
    try {
      it->second(value);
    } catch (const json::exception&) {
      throw UsageError("config key '" + key + "' has the wrong type");
    }
  }
}

RunConfig resolve(RunConfig c) {
  require(std::find(kCommands.begin(), kCommands.end(), c.command) != kCommands.end(),
          "unknown command '" + c.command + "'");
  const bool linear = c.command == "observability" || c.command == "control";
  const bool sweep_delta = c.command == "sweep" && c.param == "delta";
  if (c.n == 0) c.n = (linear || c.command == "steer" || sweep_delta) ? 256 : 512;
  if (c.nt == 0) c.nt = c.command == "observability" ? 1024 : 2048;

  require(std::isfinite(c.mu), "mu must be finite");
  require(c.j >= 0 && c.j <= 50, "j must lie in [0, 50]");
  const double mu_floor = -std::pow((c.j + 1) * std::numbers::pi, 2);
  require(c.mu > mu_floor, "mu must exceed -(j+1)^2 pi^2");
  require(c.command == "groundstate" || c.command == "sweep" || c.mu >= 0.0,
          "the linearized problems need mu >= 0");
  require(std::isfinite(c.T) && c.T > 0.0, "T must be positive");
  require(c.a >= 0.0 && c.a < c.b && c.b <= 1.0, "need 0 <= a < b <= 1");
  require(c.n >= 8 && c.n <= 4096, "n must lie in [8, 4096]");
  require(c.nt >= 2 && c.nt <= 1 << 20, "nt must lie in [2, 2^20]");
  require(c.modes >= 1 && c.modes <= c.n - 2, "modes must lie in [1, n-2]");
  require(c.probes >= 1, "probes must be positive");
  require(c.probe_modes >= 1 && c.probe_modes <= c.n, "probe_modes must lie in [1, n]");
  require(c.target_modes >= 1 && c.target_modes <= c.n, "target_modes must lie in [1, n]");
  require(c.cg_tol > 0.0 && c.cg_tol < 1.0, "cg_tol must lie in (0, 1)");
  require(c.cg_max_iters >= 1, "cg_max_iters must be positive");
  require(c.newton_tol > 0.0, "newton_tol must be positive");
  require(c.newton_max_iters >= 0, "newton_max_iters must be nonnegative");
  require(c.delta >= 0.0 && c.delta < 1.0, "delta must lie in [0, 1)");
  require(c.jobs >= 1, "jobs must be positive");
  require(c.trajectory_stride >= 0, "trajectory_stride must be nonnegative");
  require(!c.output_dir.empty(), "output_dir must not be empty");
  if (c.command == "sweep") {
    require(c.param == "mu" || c.param == "T" || c.param == "delta", "sweep param must be mu, T or delta");
    require(!c.values.empty(), "sweep needs a nonempty list of values");
    for (double v : c.values) {
      require(std::isfinite(v), "sweep values must be finite");
      if (c.param == "mu") require(v > mu_floor, "swept mu must exceed -(j+1)^2 pi^2");
      if (c.param == "T") require(v > 0.0, "swept T must be positive");
      if (c.param == "delta") require(v >= 0.0 && v < 1.0, "swept delta must lie in [0, 1)");
    }
    if (c.param != "mu") require(c.mu >= 0.0, "the linearized problems need mu >= 0");
  }
  return c;
}

Report::Report(const RunConfig& config) : config_(to_json(config)) {}

void Report::check(const std::string& name, double value, const std::string& relation, double bound, double upper) {
  Check c{name, value, relation, bound, upper, false};
  if (relation == "<=") c.passed = value <= bound;
  else if (relation == ">=") c.passed = value >= bound;
  else if (relation == ">") c.passed = value > bound;
  else if (relation == "==") c.passed = value == bound;
  else if (relation == "in") c.passed = value >= bound && value <= upper;
  else throw std::logic_error("unknown relation " + relation);
  checks_.push_back(c);
}

void Report::fail(const std::string& message) { failures_.push_back(message); }

bool Report::passed() const {
  return failures_.empty() && std::all_of(checks_.begin(), checks_.end(), [](const Check& c) { return c.passed; });
}

json Report::json() const {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : checks_) {
    nlohmann::json j{{"name", c.name}, {"value", c.value}, {"relation", c.relation}, {"bound", c.bound},
                     {"passed", c.passed}};
    if (c.relation == "in") j["upper"] = c.upper;
    checks.push_back(j);
  }
  return nlohmann::json{{"command", config_["command"]},
                        {"version", NLSCTL_VERSION},
                        {"config", config_},
                        {"passed", passed()},
                        {"checks", checks},
                        {"failures", failures_},
                        {"results", results_}};
}

CsvWriter::CsvWriter(const fs::path& path, const std::vector<std::string>& header)
    : file_(std::fopen(path.string().c_str(), "w")), columns_(header.size()) {
  if (!file_) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < header.size(); ++i) std::fprintf(file_, "%s%s", i ? "," : "", header[i].c_str());
  std::fputc('\n', file_);
}

CsvWriter::~CsvWriter() { std::fclose(file_); }

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != columns_) throw std::logic_error("CSV row width does not match the header");
  for (std::size_t i = 0; i < values.size(); ++i) std::fprintf(file_, "%s%.17g", i ? "," : "", values[i]);
  std::fputc('\n', file_);
}

Report cmd_groundstate(const RunConfig& c, const fs::path& dir) {
  Report report(c);
  Stopwatch sw;
  const Grid grid(c.n);
  const BoundState bs = bound_state(c.mu, c.j, grid);
  const double residual = sup_abs(bvp_residual(bs));
  const double refined = sup_abs(bvp_residual(bound_state(c.mu, c.j, Grid(2 * c.n + 1))));
  const NormIdentity ni = norm_sq_identity(c.mu, c.j, grid);
  const double ni_defect = std::abs(ni.lhs - ni.rhs) / std::abs(ni.rhs);
  const int nodes = sign_changes(bs.values);
  report.time("bound_state", sw.lap());

  auto& r = report.results();
  r["k"] = bs.k;
  r["K"] = complete_elliptic_k(bs.k);
  r["node_count"] = nodes;
  r["l2_norm_sq"] = std::pow(norm_l2(grid, bs.values), 2);
  r["max_abs_phi"] = sup_abs(bs.values);
  r["bvp_residual_sup"] = residual;
  r["bvp_residual_sup_half_h"] = refined;
  r["bvp_halving_ratio"] = residual / refined;
  r["norm_identity"] = {{"quadrature", ni.lhs}, {"closed_form", ni.rhs}, {"relative_defect", ni_defect}};

  report.check("node_count", nodes, "==", c.j);
  report.check("bvp_halving_ratio", residual / refined, "in", 3.5, 4.5);
  report.check("norm_identity_relative_defect", ni_defect, "<=", 1e-4);

  if (c.j == 0) {
    const VariationalGroundState vg = ground_state_variational(c.mu, grid);
    const double distance = sup_abs(vg.values - bs.values);
    const Field potential = (c.mu - 3.0 * bs.values.array().square()).matrix();
    const int negative = Tridiagonal::schrodinger(grid, potential, OperatorRole::Lplus).count_below(0.0);
    r["variational"] = {{"sup_distance", distance}, {"iterations", vg.iterations}, {"lambda", vg.lambda}};
    r["lplus_negative_eigenvalues"] = negative;
    report.check("variational_sup_distance", distance, "<=", 1e-3);
    report.check("lplus_negative_eigenvalues", negative, "==", 1);
    report.time("variational", sw.lap());
  }

  CsvWriter csv(dir / "phi.csv", {"x[1]", "phi[1]", "dmu_phi[1]"});
  for (int i = 0; i < c.n; ++i) csv.row({grid.node(i), bs.values[i], bs.dmu_values[i]});
  return report;
}

Report cmd_spectrum(const RunConfig& c, const fs::path& dir) {
  Report report(c);
  Stopwatch sw;
  const Grid grid(c.n);
  const BoundState bs = bound_state(c.mu, c.j, grid);
  const LinearizedSystem sys = assemble(bs, omega_prime(c));
  const SpectralBasis basis = compute_spectrum(sys, c.modes, &bs.dmu_values);
  report.time("eigenpairs", sw.lap());
  const EigenvalueAsymptotics asym = verify_eigenvalue_asymptotics(basis, c.mu, grid);
  const EigenfunctionAsymptotics efun =
      verify_eigenfunction_asymptotics(basis, c.mu, grid, 5, std::min(40, basis.indices.back()));
  const FrameReport frame = frame_constants(basis, grid, sys.chi, c.T);
  report.time("asymptotics_and_frame", sw.lap());

  const double beta_first = basis.betas.front();
  const double re_ratio = basis.max_real_part / beta_first;
  auto& r = report.results();
  r["modes_computed"] = basis.betas.size();
  r["first_index"] = basis.indices.front();
  r["zero_mode_excluded"] = basis.zero_mode_excluded;
  r["zero_cluster_count"] = basis.zero_cluster_count;
  r["geometric_zero_count"] = basis.geometric_zero_count;
  r["spectral_gap"] = basis.spectral_gap;
  r["max_real_part"] = basis.max_real_part;
  r["max_real_part_over_first_beta"] = re_ratio;
  r["min_gap"] = basis.min_gap;
  r["max_residual"] = *std::max_element(basis.residuals.begin(), basis.residuals.end());
  r["asymptotics"] = {{"constant", asym.constant},
                      {"slope", asym.slope},
                      {"growth_flag", asym.growth_flag},
                      {"trusted_modes", asym.trusted_modes},
                      {"eigenfunction_envelope", efun.envelope_constant}};
  r["frame"] = {{"bessel_B", frame.bessel_B},
                {"m_V", frame.m_V},
                {"riesz_A", frame.riesz_A},
                {"riesz_singular", frame.riesz_singular}};

  report.check("max_real_part_over_first_beta", re_ratio, "<=", 1e-8);
  report.check("min_gap", basis.min_gap, ">", 0.0);
  if (basis.null_pair) {
    r["jordan_residual"] = basis.null_pair->jordan_residual;
    r["kernel_residual"] = basis.null_pair->kernel_residual;
    report.check("jordan_residual", basis.null_pair->jordan_residual, "<=", 2e-3);
  }
  report.check("asymptotic_slope", asym.slope, "<=", 0.05);
  report.check("bessel_B", frame.bessel_B, ">", 0.0);
  report.check("m_V", frame.m_V, ">", 0.0);
  report.check("riesz_A", frame.riesz_A, ">", 0.0);

  {
    CsvWriter csv(dir / "betas.csv",
                  {"index[1]", "beta[1]", "residual[1]", "deviation_discrete[1]", "deviation_continuum[1]"});
    for (std::size_t i = 0; i < basis.betas.size(); ++i) {
      const int n = basis.indices[i];
      csv.row({double(n), basis.betas[i], basis.residuals[i],
               basis.betas[i] - discrete_free_eigenvalue(n, c.mu, grid),
               basis.betas[i] - continuum_eigenvalue(n, c.mu)});
    }
  }
  CsvWriter csv(dir / "eigenfunctions.csv",
                {"index[1]", "beta[1]", "plus_deviation[1]", "minus_deviation[1]", "index_times_deviation[1]"});
  for (const auto& row : efun.rows)
    csv.row({double(row.n), row.beta, row.plus_deviation, row.minus_deviation, row.scaled});
  return report;
}

Report cmd_observability(const RunConfig& c, const fs::path& dir) {
  Report report(c);
  Stopwatch sw;
  const Grid grid(c.n);
  const HumProblem p = hum_problem(c, grid);
  const ObservabilityEstimate est = observability_constant(p, c.probes, c.seed, c.probe_modes);
  report.time("observability_constant", sw.lap());

  const auto pair = smooth_probes(grid, 2, c.probe_modes, c.seed + 1000);
  const QuadraticIdentity q = quadratic_identity(p, pair[0]);
  const TwoComponentField su = apply_S(p, pair[0]), sv = apply_S(p, pair[1]);
  const double symmetry = std::abs(inner(grid, su, pair[1]) - inner(grid, pair[0], sv)) /
                          (norm_l2(grid, su) * norm_l2(grid, pair[1]));
  const H1Identity h1 = h1_identity(p, pair[0]);
  report.time("identities", sw.lap());

  auto& r = report.results();
  r["c_hum"] = est.c_hum;
  r["lanczos_steps"] = est.lanczos_steps;
  r["ritz_values"] = est.ritz_values;
  r["probe_quotients"] = est.probe_quotients;
  r["quadratic_identity"] = {{"lhs", q.lhs}, {"rhs", q.rhs}, {"relative_defect", q.defect}};
  r["symmetry_defect"] = symmetry;
  r["h1_identity"] = {{"lhs", h1.lhs}, {"potential_term", h1.i1}, {"gradient_term", h1.i2},
                      {"cutoff_derivative_term", h1.i3}, {"relative_defect", h1.defect}};

  report.check("c_hum", est.c_hum, ">", 0.0);
  report.check("quadratic_identity_defect", q.defect, "<=", 1e-6);
  report.check("symmetry_defect", symmetry, "<=", 1e-8);
  report.check("h1_identity_defect", h1.defect, "<=", 1e-6);

  {
    CsvWriter csv(dir / "probes.csv", {"probe[1]", "rayleigh_quotient[1]"});
    for (std::size_t i = 0; i < est.probe_quotients.size(); ++i) csv.row({double(i), est.probe_quotients[i]});
  }
  CsvWriter csv(dir / "ritz.csv", {"index[1]", "ritz_value[1]"});
  for (std::size_t i = 0; i < est.ritz_values.size(); ++i) csv.row({double(i), est.ritz_values[i]});
  return report;
}

Report cmd_control(const RunConfig& c, const fs::path& dir) {
  Report report(c);
  Stopwatch sw;
  const Grid grid(c.n);
  const HumProblem p = hum_problem(c, grid);

  TwoComponentField target;
  if (c.manufactured) {
    // Terminal state of a known smooth forcing.
    const Field x = grid.nodes();
    const Field s1 = (std::numbers::pi * x.array()).sin().matrix();
    const Field s2 = (2.0 * std::numbers::pi * x.array()).sin().matrix();
    std::vector<TwoComponentField> states;
    for (double t : uniform_times(c.T, c.nt)) {
      const double w = std::sin(std::numbers::pi * t / c.T);
      states.push_back({w * s1, -w * s2});
    }
    const Trajectory forcing = make_trajectory(grid, uniform_times(c.T, c.nt), std::move(states));
    target = propagate_forward_forced(p.sys, TwoComponentField::zero(c.n), forcing, c.T, c.nt).states.back();
  } else {
    target = smooth_probes(grid, 1, c.target_modes, c.seed).front();
  }
  const ControlSolution sol = solve_linear_control(p, target);
  report.time("hum_solve", sw.lap());

  auto& r = report.results();
  r["target_l2"] = norm_l2(grid, target);
  r["target_h1"] = norm_h1(grid, target);
  r["terminal_residual_l2"] = sol.terminal_residual_l2;
  r["terminal_residual_h1"] = sol.terminal_residual_h1;
  r["cg_iterations"] = sol.cg_iterations;
  r["control_ratio"] = sol.control_ratio;
  report.check("terminal_residual_l2", sol.terminal_residual_l2, "<=", 1e-4);
  report.check("cg_iterations", sol.cg_iterations, "<=", c.cg_max_iters);
  report.check("control_ratio", sol.control_ratio, ">", 0.0);

  {
    CsvWriter csv(dir / "norms.csv",
                  {"t[1]", "control_l2[1]", "control_h1[1]", "state_l2[1]", "state_h1[1]"});
    for (std::size_t m = 0; m < sol.control.times.size(); ++m)
      csv.row({sol.control.times[m], sol.control.l2_norms[m], norm_h1(grid, sol.control.states[m]),
               sol.state.l2_norms[m], norm_h1(grid, sol.state.states[m])});
  }
  {
    CsvWriter csv(dir / "terminal.csv",
                  {"x[1]", "target_first[1]", "target_second[1]", "state_first[1]", "state_second[1]"});
    const TwoComponentField& zt = sol.state.states.back();
    for (int i = 0; i < c.n; ++i)
      csv.row({grid.node(i), target.first[i], target.second[i], zt.first[i], zt.second[i]});
  }
  {
    CsvWriter csv(dir / "cg.csv", {"iteration[1]", "relative_residual[1]"});
    for (std::size_t k = 0; k < sol.cg_history.size(); ++k) csv.row({double(k + 1), sol.cg_history[k]});
  }
  CsvWriter csv(dir / "trajectory.csv",
                {"t[1]", "x[1]", "control_first[1]", "control_second[1]", "state_first[1]", "state_second[1]"});
  for (int m = 0; m <= c.nt; m += stride(c)) {
    const auto& h = sol.control.states[m];
    const auto& z = sol.state.states[m];
    for (int i = 0; i < c.n; ++i)
      csv.row({sol.control.times[m], grid.node(i), h.first[i], h.second[i], z.first[i], z.second[i]});
  }
  return report;
}

Report cmd_steer(const RunConfig& c, const fs::path& dir) {
  Report report(c);
  Stopwatch sw;
  const Grid grid(c.n);
  const Field phi = discrete_bound_state(c.mu, 0, grid);
  const double phi_h1 = norm_h1(grid, phi);
  SteeringProblem p = make_steering_problem(c.mu, c.T, c.n, c.nt, c.delta * phi_h1, omega_prime(c), c.seed);
  p.hum.cg_tol = c.cg_tol;
  p.hum.cg_max_iters = c.cg_max_iters;
  p.newton_tol = c.newton_tol;
  p.newton_max_iters = c.newton_max_iters;

  auto& r = report.results();
  r["phi_h1"] = phi_h1;
  r["delta"] = p.delta;
  std::vector<double> history;
  SteeringResult result;
  bool converged = false;
  try {
    result = steer(p);
    history = result.h1_error_history;
    converged = true;
  } catch (const IterationError& e) {
    history = e.history();
    report.fail(e.what());
  }
  report.time("steering", sw.lap());

  std::vector<double> factors;
  for (std::size_t k = 1; k < history.size(); ++k) factors.push_back(history[k - 1] / history[k]);
  const bool decreasing = history.size() < 2 || std::all_of(factors.begin(), factors.end(), [](double f) {
                            return f > 1.0;
                          });
  r["converged"] = converged;
  r["h1_error_history"] = history;
  r["contraction_factors"] = factors;
  r["min_contraction_factor"] = factors.empty() ? 0.0 : *std::min_element(factors.begin(), factors.end());
  r["iterations"] = converged ? result.iterations : static_cast<int>(history.size()) - 1;
  r["cg_iterations"] = result.cg_iterations;
  r["filter_modes"] = result.filter_modes;
  r["line_search_used"] = result.line_search_used;
  r["interpolated_control"] = result.interpolated;

  report.check("final_h1_error", history.empty() ? INFINITY : history.back(), "<=", c.newton_tol);
  report.check("error_history_strictly_decreasing", decreasing ? 1.0 : 0.0, "==", 1.0);

  {
    CsvWriter csv(dir / "newton.csv", {"iteration[1]", "h1_error[1]", "cg_iterations[1]", "step_length[1]"});
    for (std::size_t k = 0; k < history.size(); ++k) {
      const double cg = k < result.cg_iterations.size() ? result.cg_iterations[k] : 0.0;
      const double step = k < result.step_lengths.size() ? result.step_lengths[k] : 0.0;
      csv.row({double(k), history[k], cg, step});
    }
  }
  if (!converged) return report;

  const ComplexField phic = phi.cast<std::complex<double>>();
  {
    CsvWriter csv(dir / "control_norms.csv", {"t[1]", "control_l2[1]", "control_h1[1]", "orbit_distance_l2[1]"});
    for (std::size_t m = 0; m < result.control.times.size(); ++m) {
      const double t = result.control.times[m];
      const ComplexField orbit = std::polar(1.0, c.mu * t) * phic;
      csv.row({t, norm_l2(grid, result.control.states[m]), norm_h1(grid, result.control.states[m]),
               norm_l2(grid, ComplexField(result.state.states[m] - orbit))});
    }
  }
  {
    CsvWriter csv(dir / "final.csv", {"x[1]", "re_state[1]", "im_state[1]", "re_target[1]", "im_target[1]"});
    for (int i = 0; i < c.n; ++i)
      csv.row({grid.node(i), result.final_state[i].real(), result.final_state[i].imag(), p.u1[i].real(),
               p.u1[i].imag()});
  }
  CsvWriter csv(dir / "control.csv", {"t[1]", "x[1]", "re_control[1]", "im_control[1]"});
  for (int m = 0; m <= c.nt; m += stride(c))
    for (int i = 0; i < c.n; ++i)
      csv.row({result.control.times[m], grid.node(i), result.control.states[m][i].real(),
               result.control.states[m][i].imag()});
  return report;
}

namespace {

struct SweepRow {
  std::vector<double> values;
  bool ok = true;
  std::string error = {};
};

template <typename F>
std::vector<SweepRow> run_rows(const std::vector<double>& values, int jobs, F&& row) {
  std::vector<SweepRow> rows(values.size());
  auto guarded = [&](std::size_t i) {
    SweepRow out;
    try {
      out = row(values[i]);
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
    }
    return out;
  };
  for (std::size_t start = 0; start < values.size(); start += jobs) {
    const std::size_t stop = std::min(values.size(), start + static_cast<std::size_t>(jobs));
    std::vector<std::future<SweepRow>> pending;
    for (std::size_t i = start; i < stop; ++i) pending.push_back(std::async(std::launch::async, guarded, i));
    for (std::size_t i = start; i < stop; ++i) rows[i] = pending[i - start].get();
  }
  return rows;
}

}  // namespace

Report cmd_sweep(const RunConfig& c, const fs::path& dir) {
  Report report(c);
  Stopwatch sw;
  const Grid grid(c.n);
  std::vector<std::string> header;
  std::vector<SweepRow> rows;
  std::string monotone_column;
  int monotone_index = 1;
  bool strict = false;

  if (c.param == "mu") {
    header = {"mu[1]", "k[1]", "l2_norm_sq[1]", "norm_identity_closed_form[1]", "node_count[1]"};
    rows = run_rows(c.values, c.jobs, [&](double mu) {
      const BoundState bs = bound_state(mu, c.j, grid);
      const NormIdentity ni = norm_sq_identity(mu, c.j, grid);
      return SweepRow{{mu, bs.k, std::pow(norm_l2(grid, bs.values), 2), ni.rhs, double(sign_changes(bs.values))}};
    });
    monotone_column = "l2_norm_sq";
    monotone_index = 2;
    strict = true;
  } else if (c.param == "T") {
    const BoundState bs = bound_state(c.mu, 0, grid);
    const LinearizedSystem sys = assemble(bs, omega_prime(c));
    const SpectralBasis basis = compute_spectrum(sys, c.modes);
    report.time("eigenpairs", sw.lap());
    header = {"T[1]", "riesz_A[1]", "riesz_singular[1]"};
    rows = run_rows(c.values, c.jobs, [&](double T) {
      bool singular = false;
      const double a = riesz_constant(basis.betas, T, &singular);
      return SweepRow{{T, a, singular ? 1.0 : 0.0}};
    });
    monotone_column = "riesz_A";
  } else {
    const Field phi = discrete_bound_state(c.mu, 0, grid);
    const double phi_h1 = norm_h1(grid, phi);
    header = {"delta_relative[1]", "delta[1]", "converged[1]", "iterations[1]", "final_h1_error[1]"};
    rows = run_rows(c.values, c.jobs, [&](double d) {
      SteeringProblem p = make_steering_problem(c.mu, c.T, c.n, c.nt, d * phi_h1, omega_prime(c), c.seed);
      p.hum.cg_tol = c.cg_tol;
      p.hum.cg_max_iters = c.cg_max_iters;
      p.newton_tol = c.newton_tol;
      p.newton_max_iters = c.newton_max_iters;
      try {
        const SteeringResult s = steer(p);
        return SweepRow{{d, p.delta, 1.0, double(s.iterations), s.h1_error_history.back()}};
      } catch (const IterationError& e) {
        return SweepRow{{d, p.delta, 0.0, double(e.history().size()) - 1.0, e.residual()}, false, e.what()};
      }
    });
  }
  report.time("rows", sw.lap());

  int failed = 0;
  json row_errors = json::array();
  CsvWriter csv(dir / ("sweep_" + c.param + ".csv"), header);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].ok) {
      ++failed;
      row_errors.push_back({{"row", i}, {"value", c.values[i]}, {"error", rows[i].error}});
    }
    std::vector<double> out = rows[i].values;
    if (out.size() != header.size()) {
      out.assign(header.size(), NAN);
      out[0] = c.values[i];
    }
    csv.row(out);
  }
  auto& r = report.results();
  r["rows"] = rows.size();
  r["failed_rows"] = failed;
  r["row_errors"] = row_errors;
  report.check("failed_rows", failed, "==", 0);

  if (!monotone_column.empty() && strictly_increasing(c.values)) {
    std::vector<double> column;
    for (const auto& row : rows)
      if (row.ok) column.push_back(row.values[monotone_index]);
    const bool ok = strict ? strictly_increasing(column) : nondecreasing(column);
    const std::string name = monotone_column + (strict ? "_strictly_increasing" : "_nondecreasing");
    r[name] = ok;
    report.check(name, ok ? 1.0 : 0.0, "==", 1.0);
  }
  return report;
}

int execute(const RunConfig& config) {
  const fs::path dir(config.output_dir);
  try {
    fs::create_directories(dir);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "nlsctl: cannot create output directory: " << e.what() << '\n';
    return 1;
  }
  static const std::map<std::string, Report (*)(const RunConfig&, const fs::path&)> commands = {
      {"groundstate", cmd_groundstate}, {"spectrum", cmd_spectrum}, {"observability", cmd_observability},
      {"control", cmd_control},         {"steer", cmd_steer},       {"sweep", cmd_sweep}};

  Stopwatch total;
  std::optional<Report> report;
  try {
    report = commands.at(config.command)(config, dir);
  } catch (const DomainError& e) {
    std::cerr << "nlsctl: invalid parameters: " << e.what() << '\n';
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "nlsctl: invalid parameters: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    report.emplace(config);
    report->fail(e.what());
    std::cerr << "nlsctl: " << config.command << " failed: " << e.what() << '\n';
  }
  report->time("total", total.lap());

  std::ofstream(dir / "report.json") << report->json().dump(2) << '\n';
  std::ofstream(dir / "timings.json") << report->timings().dump(2) << '\n';
  for (const auto& c : report->checks())
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " = " << c.value << '\n';
  std::cout << config.command << ": " << (report->passed() ? "all checks passed" : "checks failed") << " ("
            << (dir / "report.json").string() << ")\n";
  return report->passed() ? 0 : 1;
}

int run(int argc, char** argv) {
  RunConfig config;
  if (const char* env = std::getenv("NLSCTL_OUTPUT_DIR"); env && *env) config.output_dir = env;

  // The config file is read before the flags so that flags override it.
  std::string config_path;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) config_path = argv[i + 1];
    else if (arg.rfind("--config=", 0) == 0) config_path = arg.substr(9);
  }
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      require(static_cast<bool>(in), "cannot read config file " + config_path);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        throw UsageError("config file is not valid JSON: " + std::string(e.what()));
      }
      merge_json(config, j);
    }
  } catch (const UsageError& e) {
    std::cerr << "nlsctl: " << e.what() << '\n';
    return 2;
  }

  CLI::App app{"Bound states, spectra and exact controllability of the cubic Schroedinger equation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", NLSCTL_VERSION);
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON file with parameters; flags override it");
    sub->add_option("--mu", config.mu, "bound-state frequency mu");
    sub->add_option("--j", config.j, "number of interior zeros of the bound state");
    sub->add_option("--T", config.T, "control horizon");
    sub->add_option("--a", config.a, "left end of the control interval");
    sub->add_option("--b", config.b, "right end of the control interval");
    sub->add_option("--n", config.n, "interior grid nodes (0: command default)");
    sub->add_option("--nt", config.nt, "time steps (0: command default)");
    sub->add_option("--seed", config.seed, "seed for every random probe");
    sub->add_option("--output-dir", config.output_dir, "directory for report.json and CSV files");
    sub->add_option("--cg-tol", config.cg_tol, "relative CG tolerance");
    sub->add_option("--cg-max-iters", config.cg_max_iters, "CG iteration budget");
  };
  auto* gs = app.add_subcommand("groundstate", "bound state, modulus and identity checks");
  auto* sp = app.add_subcommand("spectrum", "eigenvalues of the linearized operator and frame constants");
  auto* ob = app.add_subcommand("observability", "observability constant and HUM identities");
  auto* co = app.add_subcommand("control", "exact control of the linearized system");
  auto* st = app.add_subcommand("steer", "quasi-Newton steering of the nonlinear equation");
  auto* sw = app.add_subcommand("sweep", "one CSV row per value of a swept parameter");
  for (auto* sub : {gs, sp, ob, co, st, sw}) add_common(sub);
  for (auto* sub : {sp, sw}) sub->add_option("--modes", config.modes, "eigenpairs to compute");
  ob->add_option("--probes", config.probes, "random probes besides the Lanczos subspace");
  ob->add_option("--probe-modes", config.probe_modes, "sine modes per component in probes");
  co->add_option("--target-modes", config.target_modes, "sine modes per component in the target");
  co->add_flag("--manufactured", config.manufactured, "use the terminal state of a known forcing as target");
  for (auto* sub : {co, st}) sub->add_option("--trajectory-stride", config.trajectory_stride, "time steps between snapshots");
  for (auto* sub : {st, sw}) {
    sub->add_option("--delta", config.delta, "endpoint perturbation as a fraction of |phi|_H1");
    sub->add_option("--newton-tol", config.newton_tol, "H1 tolerance on the terminal miss");
    sub->add_option("--newton-max-iters", config.newton_max_iters, "Newton iteration budget");
  }
  sw->add_option("--param", config.param, "mu, T or delta");
  std::string values_text;
  auto* values_opt = sw->add_option("--values", values_text, "comma-separated values");
  sw->add_option("--jobs", config.jobs, "rows computed concurrently");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  config.command = app.get_subcommands().front()->get_name();

  RunConfig resolved;
  try {
    if (values_opt->count() > 0) config.values = parse_values(values_text);
    resolved = resolve(config);
  } catch (const UsageError& e) {
    std::cerr << "nlsctl: " << e.what() << '\n';
    return 2;
  }
  return execute(resolved);
}

}  // namespace nlsctl::cli
