#pragma once

#include "json.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlsctl::cli {

/// Bad flags, out-of-range parameters, unreadable config files. Maps to exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  std::string command;
  double mu = 10.0;
  int j = 0;
  double T = 2.0;
  double a = 0.3;
  double b = 0.8;
  int n = 0;   // interior nodes; 0 picks the command default
  int nt = 0;  // time steps; 0 picks the command default
  int modes = 30;
  int probes = 8;
  int probe_modes = 20;
  int target_modes = 5;
  bool manufactured = false;
  double cg_tol = 1e-8;
  int cg_max_iters = 500;
  double newton_tol = 1e-6;
  int newton_max_iters = 8;
  double delta = 0.01;  // as a fraction of |phi|_{H1}
  std::uint64_t seed = 1;
  std::string param;
  std::vector<double> values;
  int jobs = 1;
  int trajectory_stride = 0;  // 0: about 64 snapshots
  std::string output_dir = "nlsctl-out";
};

/// "1,2.5,4" -> {1, 2.5, 4}; empty or malformed lists are usage errors.
std::vector<double> parse_values(const std::string& text);

nlohmann::json to_json(const RunConfig& config);
/// Overwrites the fields present in `j`; unknown keys are a usage error.
void merge_json(RunConfig& config, const nlohmann::json& j);
/// Fills command defaults and checks every parameter before any computation.
RunConfig resolve(RunConfig config);

struct Check {
  std::string name;
  double value = 0.0;
  std::string relation;  // "<=", ">=", ">", "==", "in"
  double bound = 0.0;
  double upper = 0.0;    // for "in"
  bool passed = false;
};

class Report {
 public:
  explicit Report(const RunConfig& config);

  void check(const std::string& name, double value, const std::string& relation, double bound,
             double upper = 0.0);
  nlohmann::json& results() { return results_; }
  void time(const std::string& stage, double seconds) { timings_[stage] = seconds; }
  void fail(const std::string& message);

  bool passed() const;
  const std::vector<Check>& checks() const { return checks_; }
  nlohmann::json json() const;
  nlohmann::json timings() const { return timings_; }

 private:
  nlohmann::json config_;
  std::vector<Check> checks_;
  nlohmann::json results_ = nlohmann::json::object();
  nlohmann::json timings_ = nlohmann::json::object();
  std::vector<std::string> failures_;
};

/// Writes rows of numbers at 17 significant digits under a header of "name[unit]" columns.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<double>& values);

 private:
  std::FILE* file_;
  std::size_t columns_;
};

Report cmd_groundstate(const RunConfig& config, const std::filesystem::path& dir);
Report cmd_spectrum(const RunConfig& config, const std::filesystem::path& dir);
Report cmd_observability(const RunConfig& config, const std::filesystem::path& dir);
Report cmd_control(const RunConfig& config, const std::filesystem::path& dir);
Report cmd_steer(const RunConfig& config, const std::filesystem::path& dir);
Report cmd_sweep(const RunConfig& config, const std::filesystem::path& dir);

/// Runs a resolved config, writes report.json and timings.json, and returns the exit code.
int execute(const RunConfig& config);

/// Full command line entry point: 0 all checks pass, 1 computational failure, 2 usage error.
int run(int argc, char** argv);

}  // namespace nlsctl::cli
