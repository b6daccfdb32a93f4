#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "arbsvrg/dataset.hpp"
#include "arbsvrg/optimizers.hpp"
#include "arbsvrg/problem.hpp"
#include "arbsvrg/sampling.hpp"
#include "arbsvrg/tuning.hpp"

namespace arbsvrg {

/// Either a LIBSVM file or `synthetic:n=..,d=..,seed=..,kind=..,noise=..`.
struct DatasetSource {
  std::filesystem::path path;
  std::optional<SyntheticSpec> synthetic;
  std::optional<std::size_t> dimension;
};

DatasetSource parse_dataset_source(const std::string& text);
std::shared_ptr<const Dataset> load_dataset(const DatasetSource& source, bool scale);

enum class Algorithm { free_svrg, lsvrg_d, svrg };
std::string to_string(Algorithm algorithm);
Algorithm algorithm_from_string(const std::string& name);

/// One solver line of an experiment, before "optimal"/"auto" are resolved.
struct SolverSpec {
  std::string label;
  Algorithm algorithm = Algorithm::free_svrg;
  /// b_nice, single_element, importance, partition or independent.
  std::string sampling = "b_nice";
  std::string batch = "1";   // integer or "optimal"
  std::filesystem::path probabilities;  // one float per line
  /// Integer, "n", "n/b", "optimal" or "theory-JZ"; empty picks "n" for
  /// Free-SVRG and "theory-JZ" (m = 20 L_max / mu) for SVRG.
  std::string loop;
  std::string reset = "1/n"; // float, "1/n" or "b/n"
  std::string alpha = "auto";
  std::size_t seeds = 1;
  std::uint64_t base_seed = 0;
  double epochs = 30.0;
  ReferencePointRule reference_rule = ReferencePointRule::weighted_average;
};

struct ExperimentConfig {
  DatasetSource dataset;
  LossFamily loss = LossFamily::ridge;
  double lambda = 0.1;
  bool scale = false;
  double epsilon = 1e-4;
  double reference_tol = 1e-10;
  std::filesystem::path output_dir = "out";
  /// When false the wall_s column is left blank so traces are byte-reproducible.
  bool wall_clock = true;
  std::vector<SolverSpec> solvers;
};

/// INI text: an [experiment] section plus one [solver:<label>] per solver.
/// Relative paths are resolved against `base_dir`.
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::filesystem::path& base_dir = {});
ExperimentConfig parse_config_file(const std::filesystem::path& path);
/// Throws ValidationError naming the first problem found.
void validate(const ExperimentConfig& cfg);

/// Fully numeric solver settings.
struct ResolvedSolver {
  std::string label;
  Algorithm algorithm = Algorithm::free_svrg;
  SamplingScheme scheme = SamplingScheme::b_nice(1, 1);
  std::size_t b = 1;
  std::size_t m = 1;  // Free-SVRG and SVRG
  double p = 1.0;     // L-SVRG-D
  double alpha = 0.0;
  ConstantPair constants;
  double predicted_complexity = 0.0;
  std::size_t iterations = 0;  // outer loops, or total steps for L-SVRG-D
  std::vector<std::string> notes;
};

ResolvedSolver resolve_solver(const SolverSpec& spec, const LossModel& model,
                              const SmoothnessProfile& profile, double epsilon);

/// Header grad_evals,epoch_equiv,wall_s,suboptimality,dist_sq,lyapunov.
void write_trace_csv(const RunTrace& trace, std::ostream& out, bool wall_clock);

struct RunOutcome {
  std::string label;
  std::uint64_t seed = 0;
  std::filesystem::path trace_path;
  bool ok = true;
  std::string message;
  double final_suboptimality = 0.0;
  double final_dist_sq = 0.0;
  std::uint64_t grad_evals = 0;
};

struct ExperimentResult {
  std::vector<ResolvedSolver> solvers;
  std::vector<RunOutcome> runs;
  SmoothnessProfile profile;
  std::filesystem::path summary_path;
};

/// Runs every (solver, seed) pair, writes one CSV per run and summary.json.
/// Parallel worker slots come from `workers` (0 means ARBSVRG_WORKERS or 1).
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t workers = 0);

/// Tune table as aligned text or CSV (b,label,L,rho,alpha,m_star,complexity).
void print_tune_table(const TuneTable& table, std::ostream& out, bool csv);

/// Entry point of the `arbsvrg` tool. Returns 0, 1 (validation) or 2 (runtime).
int cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace arbsvrg
