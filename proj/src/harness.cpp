#include "arbsvrg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "arbsvrg/errors.hpp"

namespace arbsvrg {
namespace {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using json = nlohmann::ordered_json;

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty() || !std::isfinite(value)) {
    throw ValidationError(what + ": expected a number, got '" + text + "'");
  }
  return value;
}

std::uint64_t parse_unsigned(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ValidationError(what + ": expected a non-negative integer, got '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& text, const std::string& what) {
  const std::string t = lower(trim(text));
  if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
  if (t == "false" || t == "no" || t == "off" || t == "0") return false;
  throw ValidationError(what + ": expected true or false, got '" + text + "'");
}

TaskKind task_kind_from_string(const std::string& name) {
  if (name == "regression") return TaskKind::regression;
  if (name == "classification") return TaskKind::classification;
  throw ValidationError("unknown synthetic kind '" + name +
                        "' (expected regression or classification)");
}

std::vector<double> read_probabilities(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open probability file '" + path.string() + "'");
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line.substr(0, line.find('#')));
    if (t.empty()) continue;
    try {
      out.push_back(parse_double(t, "probability"));
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

fs::path resolve_path(const fs::path& base, const std::string& value) {
  fs::path p(value);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

std::string safe_file_stem(const std::string& label) {
  std::string out;
  for (char c : label) {
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  }
  return out.empty() ? "solver" : out;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Constants of independent sampling with every p_i = b/n, for batch search.
ConstantPair uniform_independent_constants(double b, const SmoothnessProfile& profile) {
  const double n = static_cast<double>(profile.n);
  const double excess = (n / b - 1.0) * profile.max_smoothness / n;
  return {profile.smoothness + excess, excess};
}

std::size_t ceil_to_size(double v) {
  return v <= 1.0 ? 1 : static_cast<std::size_t>(std::ceil(v));
}

std::size_t theory_loop(const SmoothnessProfile& profile) {
  return ceil_to_size(20.0 * profile.max_smoothness / profile.strong_convexity);
}

std::string effective_loop(const SolverSpec& spec) {
  if (!spec.loop.empty()) return spec.loop;
  return spec.algorithm == Algorithm::svrg ? "theory-JZ" : "n";
}

struct BatchResolution {
  std::size_t b = 1;
  std::string note;
};

BatchResolution resolve_optimal_batch(const SolverSpec& spec, const std::string& kind,
                                      const SmoothnessProfile& profile, double epsilon) {
  const std::size_t n = profile.n;
  const double mu = profile.strong_convexity;
  if (spec.algorithm == Algorithm::svrg) {
    return {1, "b = optimal for SVRG resolves to 1 (no mini-batch theory for the baseline)"};
  }
  if (kind != "b_nice" && kind != "independent") {
    throw ValidationError("solver '" + spec.label + "': b = optimal needs b_nice or independent "
                          "sampling (got " + kind + ")");
  }
  const bool bnice = kind == "b_nice";
  const auto constants = [&](std::size_t b) {
    const double bd = static_cast<double>(b);
    return bnice ? ConstantPair{bnice_expected_smoothness(bd, profile),
                                bnice_expected_residual(bd, profile)}
                 : uniform_independent_constants(bd, profile);
  };
  const auto describe = [](const BatchChoice& c, const std::string& rule) {
    std::ostringstream out;
    out << rule << ": b* = " << c.b << " (continuous " << c.continuous << ", " << c.regime << ")";
    return out.str();
  };

  if (spec.algorithm == Algorithm::free_svrg) {
    const std::string loop = effective_loop(spec);
    if (bnice && loop == "n") {
      const BatchChoice c = optimal_batch_m_eq_n(profile);
      return {c.b, describe(c, "closed form for m = n")};
    }
    if (bnice && loop == "n/b") {
      const BatchChoice c = optimal_batch_m_eq_n_over_b(profile);
      return {c.b, describe(c, "closed form for m = n/b")};
    }
    std::function<double(std::size_t)> fn;
    if (loop == "n") {
      fn = [&](std::size_t b) {
        return total_complexity_free(constants(b), static_cast<double>(b), static_cast<double>(n),
                                     mu, n, epsilon);
      };
    } else if (loop == "n/b") {
      fn = [&](std::size_t b) {
        const double bd = static_cast<double>(b);
        return total_complexity_free(constants(b), bd, static_cast<double>(n) / bd, mu, n, epsilon);
      };
    } else if (loop == "optimal") {
      fn = [&](std::size_t b) {
        const ConstantPair c = constants(b);
        const double m = (c.expected_smoothness + 2.0 * c.expected_residual) / mu;
        return total_complexity_free(c, static_cast<double>(b), std::max(m, 1.0), mu, n, epsilon);
      };
    } else {
      const double m = loop == "theory-JZ"
                           ? static_cast<double>(theory_loop(profile))
                           : static_cast<double>(parse_unsigned(loop, "solver '" + spec.label + "' m"));
      fn = [&, m](std::size_t b) {
        return total_complexity_free(constants(b), static_cast<double>(b), m, mu, n, epsilon);
      };
    }
    const GridOptimum g = brute_force_optimal_batch(n, fn);
    return {g.b, "grid search over b in [1, n] for m = " + loop};
  }

  // L-SVRG-D
  if (bnice && spec.reset == "1/n") {
    const BatchChoice c = optimal_batch_lsvrgd(profile);
    return {c.b, describe(c, "closed form for p = 1/n")};
  }
  const GridOptimum g = brute_force_optimal_batch(n, [&](std::size_t b) {
    const double bd = static_cast<double>(b);
    double p;
    if (spec.reset == "1/n") {
      p = 1.0 / static_cast<double>(n);
    } else if (spec.reset == "b/n") {
      p = bd / static_cast<double>(n);
    } else {
      p = parse_double(spec.reset, "p");
    }
    return total_complexity_lsvrgd(constants(b), bd, p, mu, n, epsilon);
  });
  return {g.b, "grid search over b in [1, n] for p = " + spec.reset};
}

SamplingScheme build_scheme(const SolverSpec& spec, const std::string& kind, std::size_t b,
                            const SmoothnessProfile& profile) {
  const std::size_t n = profile.n;
  if (kind == "b_nice") return SamplingScheme::b_nice(n, b);
  if (kind == "partition") return SamplingScheme::uniform_partition(n, b);
  if (kind == "importance") {
    const auto& li = profile.example_smoothness;
    const double total = std::accumulate(li.begin(), li.end(), 0.0);
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = li[i] / total;
    return SamplingScheme::single_element(std::move(p));
  }
  if (kind == "single_element") {
    if (spec.probabilities.empty()) {
      return SamplingScheme::single_element(std::vector<double>(n, 1.0 / static_cast<double>(n)));
    }
    auto p = read_probabilities(spec.probabilities);
    if (p.size() != n) throw ValidationError("probability file must list one value per example");
    return SamplingScheme::single_element(std::move(p));
  }
  // independent
  if (spec.probabilities.empty()) {
    return SamplingScheme::independent(
        std::vector<double>(n, static_cast<double>(b) / static_cast<double>(n)));
  }
  auto p = read_probabilities(spec.probabilities);
  if (p.size() != n) throw ValidationError("probability file must list one value per example");
  return SamplingScheme::independent(std::move(p));
}

std::string canonical_kind(const std::string& raw) {
  const std::string k = lower(trim(raw));
  if (k == "importance") return k;
  return to_string(sampling_kind_from_string(k));
}

SolverSpec parse_solver_section(const std::string& label, const pt::ptree& section,
                                const fs::path& base_dir) {
  SolverSpec spec;
  spec.label = label;
  const auto get = [&](const std::string& key) -> std::optional<std::string> {
    const auto v = section.get_optional<std::string>(pt::ptree::path_type(key, '/'));
    if (!v) return std::nullopt;
    return trim(*v);
  };
  static const std::vector<std::string> known = {
      "algorithm", "sampling.kind", "sampling.b", "sampling.probabilities", "m", "p", "alpha",
      "seeds", "base_seed", "epochs", "reference_rule"};
  for (const auto& [key, value] : section) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError("solver '" + label + "': unknown key '" + key + "'");
    }
  }
  const std::string where = "solver '" + label + "' ";
  const auto algorithm = get("algorithm");
  if (!algorithm) throw ValidationError(where + "is missing 'algorithm'");
  spec.algorithm = algorithm_from_string(*algorithm);
  if (auto v = get("sampling.kind")) spec.sampling = *v;
  if (auto v = get("sampling.b")) spec.batch = *v;
  if (auto v = get("sampling.probabilities")) spec.probabilities = resolve_path(base_dir, *v);
  if (auto v = get("m")) spec.loop = *v;
  if (auto v = get("p")) spec.reset = *v;
  if (auto v = get("alpha")) spec.alpha = *v;
  if (auto v = get("seeds")) spec.seeds = parse_unsigned(*v, where + "seeds");
  if (auto v = get("base_seed")) spec.base_seed = parse_unsigned(*v, where + "base_seed");
  if (auto v = get("epochs")) spec.epochs = parse_double(*v, where + "epochs");
  if (auto v = get("reference_rule")) {
    if (*v == "weighted_average") {
      spec.reference_rule = ReferencePointRule::weighted_average;
    } else if (*v == "sampled_iterate") {
      spec.reference_rule = ReferencePointRule::sampled_iterate;
    } else {
      throw ValidationError(where + "reference_rule must be weighted_average or sampled_iterate");
    }
  }
  return spec;
}

}  // namespace

DatasetSource parse_dataset_source(const std::string& text) {
  DatasetSource source;
  const std::string t = trim(text);
  const std::string prefix = "synthetic:";
  if (t.rfind(prefix, 0) != 0) {
    if (t.empty()) throw ValidationError("dataset source is empty");
    source.path = t;
    return source;
  }
  SyntheticSpec spec;
  std::stringstream items(t.substr(prefix.size()));
  std::string item;
  while (std::getline(items, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("synthetic spec item '" + item + "' needs key=value");
    const std::string key = trim(item.substr(0, eq));
    const std::string value = trim(item.substr(eq + 1));
    if (key == "n") {
      spec.n = parse_unsigned(value, "synthetic n");
    } else if (key == "d") {
      spec.d = parse_unsigned(value, "synthetic d");
    } else if (key == "seed") {
      spec.seed = parse_unsigned(value, "synthetic seed");
    } else if (key == "kind") {
      spec.kind = task_kind_from_string(value);
    } else if (key == "noise") {
      spec.noise = parse_double(value, "synthetic noise");
    } else {
      throw ValidationError("unknown synthetic key '" + key + "'");
    }
  }
  source.synthetic = spec;
  return source;
}

std::shared_ptr<const Dataset> load_dataset(const DatasetSource& source, bool scale) {
  Dataset ds = [&] {
    if (source.synthetic) return generate_synthetic(*source.synthetic);
    ParseOptions options;
    options.dimension = source.dimension;
    return parse_libsvm(source.path, options);
  }();
  if (scale) ds = scale_columns(ds);
  return std::make_shared<const Dataset>(std::move(ds));
}

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::free_svrg: return "free_svrg";
    case Algorithm::lsvrg_d: return "lsvrg_d";
    case Algorithm::svrg: return "svrg";
  }
  return "unknown";
}

Algorithm algorithm_from_string(const std::string& name) {
  const std::string k = lower(trim(name));
  if (k == "free_svrg" || k == "free-svrg") return Algorithm::free_svrg;
  if (k == "lsvrg_d" || k == "l-svrg-d") return Algorithm::lsvrg_d;
  if (k == "svrg") return Algorithm::svrg;
  throw ValidationError("unknown algorithm '" + name + "' (expected free_svrg, lsvrg_d or svrg)");
}

ExperimentConfig parse_config_text(const std::string& text, const fs::path& base_dir) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.line(), e.message());
  }
  ExperimentConfig cfg;
  const auto experiment = tree.get_child_optional("experiment");
  if (!experiment) throw ValidationError("config needs an [experiment] section");
  const auto get = [&](const std::string& key) -> std::optional<std::string> {
    const auto v = experiment->get_optional<std::string>(pt::ptree::path_type(key, '/'));
    if (!v) return std::nullopt;
    return trim(*v);
  };
  static const std::vector<std::string> known = {
      "dataset", "dimension", "loss", "lambda", "scale_columns", "epsilon",
      "reference_tol", "output_dir", "wall_clock"};
  for (const auto& [key, value] : *experiment) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError("[experiment]: unknown key '" + key + "'");
    }
  }
  const auto dataset = get("dataset");
  if (!dataset) throw ValidationError("[experiment] is missing 'dataset'");
  cfg.dataset = parse_dataset_source(*dataset);
  if (!cfg.dataset.synthetic) cfg.dataset.path = resolve_path(base_dir, cfg.dataset.path.string());
  if (auto v = get("dimension")) cfg.dataset.dimension = parse_unsigned(*v, "dimension");
  if (auto v = get("loss")) cfg.loss = loss_family_from_string(*v);
  if (auto v = get("lambda")) cfg.lambda = parse_double(*v, "lambda");
  if (auto v = get("scale_columns")) cfg.scale = parse_bool(*v, "scale_columns");
  if (auto v = get("epsilon")) cfg.epsilon = parse_double(*v, "epsilon");
  if (auto v = get("reference_tol")) cfg.reference_tol = parse_double(*v, "reference_tol");
  if (auto v = get("output_dir")) cfg.output_dir = resolve_path(base_dir, *v);
  else cfg.output_dir = resolve_path(base_dir, "out");
  if (auto v = get("wall_clock")) cfg.wall_clock = parse_bool(*v, "wall_clock");

  const std::string prefix = "solver:";
  for (const auto& [name, section] : tree) {
    if (name == "experiment") continue;
    if (name.rfind(prefix, 0) != 0) {
      throw ValidationError("unknown section [" + name + "] (expected experiment or solver:<label>)");
    }
    const std::string label = trim(name.substr(prefix.size()));
    if (label.empty()) throw ValidationError("solver section needs a label: [solver:<label>]");
    cfg.solvers.push_back(parse_solver_section(label, section, base_dir));
  }
  return cfg;
}

ExperimentConfig parse_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path.parent_path());
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.solvers.empty()) throw ValidationError("config lists no [solver:<label>] sections");
  if (!cfg.dataset.synthetic && !fs::exists(cfg.dataset.path)) {
    throw ValidationError("dataset file '" + cfg.dataset.path.string() + "' does not exist");
  }
  if (!(cfg.lambda > 0.0)) throw ValidationError("lambda must be > 0 for experiments");
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) throw ValidationError("epsilon must lie in (0, 1)");
  if (!(cfg.reference_tol > 0.0)) throw ValidationError("reference_tol must be > 0");
  std::vector<std::string> labels;
  for (const auto& s : cfg.solvers) {
    const std::string where = "solver '" + s.label + "': ";
    if (std::find(labels.begin(), labels.end(), s.label) != labels.end()) {
      throw ValidationError(where + "duplicate label");
    }
    labels.push_back(s.label);
    if (!(s.epochs >= 1.0)) throw ValidationError(where + "budget must be at least 1 epoch");
    if (s.seeds < 1) throw ValidationError(where + "seeds must be >= 1");
    const std::string kind = canonical_kind(s.sampling);
    if (!s.probabilities.empty()) {
      if (kind != "single_element" && kind != "independent") {
        throw ValidationError(where + "sampling.probabilities applies to single_element and "
                              "independent sampling only");
      }
      if (!fs::exists(s.probabilities)) {
        throw ValidationError(where + "probability file '" + s.probabilities.string() +
                              "' does not exist");
      }
    }
    if (s.batch != "optimal") parse_unsigned(s.batch, where + "sampling.b");
    const std::string loop = effective_loop(s);
    if (loop != "n" && loop != "n/b" && loop != "optimal" && loop != "theory-JZ") {
      if (parse_unsigned(loop, where + "m") < 1) throw ValidationError(where + "m must be >= 1");
    }
    if (s.reset != "1/n" && s.reset != "b/n") {
      const double p = parse_double(s.reset, where + "p");
      if (!(p > 0.0 && p <= 1.0)) throw ValidationError(where + "p must lie in (0, 1]");
    }
    if (s.alpha != "auto" && !(parse_double(s.alpha, where + "alpha") > 0.0)) {
      throw ValidationError(where + "alpha must be > 0");
    }
  }
}

ResolvedSolver resolve_solver(const SolverSpec& spec, const LossModel& model,
                              const SmoothnessProfile& profile, double epsilon) {
  const std::size_t n = model.n();
  const double mu = profile.strong_convexity;
  if (!(mu > 0.0)) throw ValidationError("solver resolution needs mu > 0");
  const std::string where = "solver '" + spec.label + "': ";
  const std::string kind = canonical_kind(spec.sampling);

  ResolvedSolver r;
  r.label = spec.label;
  r.algorithm = spec.algorithm;
  if (spec.batch == "optimal") {
    const BatchResolution br = resolve_optimal_batch(spec, kind, profile, epsilon);
    r.b = br.b;
    r.notes.push_back(br.note);
  } else {
    r.b = parse_unsigned(spec.batch, where + "sampling.b");
    if (r.b < 1 || r.b > n) throw ValidationError(where + "b must lie in [1, n]");
  }
  r.scheme = build_scheme(spec, kind, r.b, profile);
  r.constants = sampling_constants(r.scheme, model, profile);
  const double batch = r.scheme.expected_batch_size();
  const double nd = static_cast<double>(n);

  if (spec.algorithm == Algorithm::lsvrg_d) {
    if (spec.reset == "1/n") {
      r.p = 1.0 / nd;
    } else if (spec.reset == "b/n") {
      r.p = std::min(1.0, batch / nd);
    } else {
      r.p = parse_double(spec.reset, where + "p");
    }
    if (!(r.p > 0.0 && r.p <= 1.0)) throw ValidationError(where + "p must lie in (0, 1]");
  } else {
    const std::string loop = effective_loop(spec);
    if (loop == "n") {
      r.m = n;
    } else if (loop == "n/b") {
      r.m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(nd / batch)));
    } else if (loop == "optimal") {
      r.m = ceil_to_size((r.constants.expected_smoothness + 2.0 * r.constants.expected_residual) / mu);
    } else if (loop == "theory-JZ") {
      r.m = theory_loop(profile);
    } else {
      r.m = parse_unsigned(loop, where + "m");
      if (r.m < 1) throw ValidationError(where + "m must be >= 1");
    }
  }

  if (spec.alpha == "auto") {
    switch (spec.algorithm) {
      case Algorithm::free_svrg: r.alpha = step_size_free(r.constants); break;
      case Algorithm::lsvrg_d:
        r.alpha = 1.0 / (2.0 * zeta(r.p) * r.constants.expected_smoothness);
        break;
      case Algorithm::svrg: r.alpha = 1.0 / (10.0 * r.constants.expected_smoothness); break;
    }
  } else {
    r.alpha = parse_double(spec.alpha, where + "alpha");
    if (!(r.alpha > 0.0)) throw ValidationError(where + "alpha must be > 0");
  }
  if (spec.algorithm == Algorithm::free_svrg && !(r.alpha * mu < 1.0)) {
    throw ValidationError(where + "Free-SVRG needs alpha * mu < 1 for its averaging weights");
  }

  const double budget = spec.epochs * nd;
  switch (spec.algorithm) {
    case Algorithm::free_svrg:
    case Algorithm::svrg: {
      const double per_loop = nd + 2.0 * batch * static_cast<double>(r.m);
      r.iterations = ceil_to_size(budget / per_loop);
      r.predicted_complexity =
          spec.algorithm == Algorithm::free_svrg
              ? total_complexity_free(r.constants, batch, static_cast<double>(r.m), mu, n, epsilon)
              : std::numeric_limits<double>::quiet_NaN();
      break;
    }
    case Algorithm::lsvrg_d: {
      r.iterations = ceil_to_size(budget / (2.0 * batch + r.p * nd));
      r.predicted_complexity = total_complexity_lsvrgd(r.constants, batch, r.p, mu, n, epsilon);
      break;
    }
  }
  return r;
}

void write_trace_csv(const RunTrace& trace, std::ostream& out, bool wall_clock) {
  out << "grad_evals,epoch_equiv,wall_s,suboptimality,dist_sq,lyapunov\n";
  for (const TraceRecord& rec : trace.records) {
    out << rec.grad_evals << ',' << format_number(rec.epoch_equiv) << ',';
    if (wall_clock) out << format_number(rec.wall_s);
    out << ',';
    if (!std::isnan(rec.suboptimality)) out << format_number(std::max(rec.suboptimality, 1e-16));
    out << ',';
    if (rec.dist_sq) out << format_number(*rec.dist_sq);
    out << ',';
    if (rec.lyapunov) out << format_number(*rec.lyapunov);
    out << '\n';
  }
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t workers) {
  validate(cfg);
  const auto data = load_dataset(cfg.dataset, cfg.scale);
  const LossModel model(data, cfg.loss, cfg.lambda);

  ExperimentResult result;
  result.profile = smoothness_profile(model);
  const SmoothnessProfile& profile = result.profile;
  for (const SolverSpec& spec : cfg.solvers) {
    result.solvers.push_back(resolve_solver(spec, model, profile, cfg.epsilon));
  }

  // Ridge problems of moderate dimension start the reference descent from the
  // normal-equations solution so only the certification steps remain.
  std::optional<Vector> start;
  if (cfg.loss == LossFamily::ridge && data->d() <= 2000) {
    const Eigen::MatrixXd a = data->to_dense();
    const double nd = static_cast<double>(data->n());
    Eigen::MatrixXd h = a.transpose() * a / nd;
    h.diagonal().array() += cfg.lambda;
    start = Eigen::LDLT<Eigen::MatrixXd>(h).solve(a.transpose() * data->labels() / nd);
  }
  const ReferenceSolution ref =
      reference_solution(model, cfg.reference_tol, profile, 2'000'000, start);
  const std::optional<Reference> reference = Reference{ref.x, ref.value};

  fs::create_directories(cfg.output_dir);

  struct Job {
    std::size_t solver;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < cfg.solvers.size(); ++s) {
    for (std::size_t k = 0; k < cfg.solvers[s].seeds; ++k) {
      jobs.push_back({s, cfg.solvers[s].base_seed + k});
    }
  }
  result.runs.resize(jobs.size());

  const Vector x0 = Vector::Zero(static_cast<Eigen::Index>(model.d()));
  const auto run_job = [&](std::size_t j) {
    const Job& job = jobs[j];
    const SolverSpec& spec = cfg.solvers[job.solver];
    const ResolvedSolver& rs = result.solvers[job.solver];
    RunOutcome& outcome = result.runs[j];
    outcome.label = spec.label;
    outcome.seed = job.seed;
    try {
      RunTrace trace;
      switch (rs.algorithm) {
        case Algorithm::free_svrg: {
          FreeSvrgConfig c;
          c.m = rs.m;
          c.alpha = rs.alpha;
          c.scheme = rs.scheme;
          c.outer_iters = rs.iterations;
          c.seed = job.seed;
          c.strong_convexity = profile.strong_convexity;
          c.expected_residual = rs.constants.expected_residual;
          c.reference_rule = spec.reference_rule;
          trace = run_free_svrg(model, c, x0, reference);
          break;
        }
        case Algorithm::lsvrg_d: {
          LSvrgDConfig c;
          c.p = rs.p;
          c.alpha = rs.alpha;
          c.scheme = rs.scheme;
          c.total_iters = rs.iterations;
          c.seed = job.seed;
          c.expected_smoothness = rs.constants.expected_smoothness;
          trace = run_lsvrg_d(model, c, x0, reference);
          break;
        }
        case Algorithm::svrg: {
          SvrgConfig c;
          c.m = rs.m;
          c.alpha = rs.alpha;
          c.scheme = rs.scheme;
          c.outer_iters = rs.iterations;
          c.seed = job.seed;
          trace = run_reference_svrg(model, c, x0, reference);
          break;
        }
      }
      outcome.trace_path =
          cfg.output_dir / (safe_file_stem(spec.label) + "_seed" + std::to_string(job.seed) + ".csv");
      std::ofstream out(outcome.trace_path);
      if (!out) throw std::runtime_error("cannot write '" + outcome.trace_path.string() + "'");
      write_trace_csv(trace, out, cfg.wall_clock);
      const TraceRecord& last = trace.records.back();
      outcome.final_suboptimality = last.suboptimality;
      outcome.final_dist_sq = last.dist_sq.value_or(std::numeric_limits<double>::quiet_NaN());
      outcome.grad_evals = last.grad_evals;
    } catch (const DivergenceError& e) {
      outcome.ok = false;
      outcome.message = e.what();
    }
  };

  if (workers == 0) {
    workers = 1;
    if (const char* env = std::getenv("ARBSVRG_WORKERS")) {
      workers = std::max<std::uint64_t>(1, parse_unsigned(env, "ARBSVRG_WORKERS"));
    }
  }
  workers = std::min(workers, jobs.size());
  if (workers <= 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) run_job(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
          try {
            run_job(j);
          } catch (...) {
            const std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  json summary;
  summary["created_utc"] = utc_timestamp();
  summary["dataset"] = {{"name", data->name()},
                        {"n", data->n()},
                        {"d", data->d()},
                        {"scaled", cfg.scale}};
  summary["loss"] = to_string(cfg.loss);
  summary["lambda"] = cfg.lambda;
  summary["epsilon"] = cfg.epsilon;
  summary["constants"] = {{"L_max", profile.max_smoothness},
                          {"L", profile.smoothness},
                          {"mu", profile.strong_convexity},
                          {"method", "power iteration on the Gram matrix, rel. tol 1e-8"}};
  summary["reference"] = {{"f_star", ref.value},
                          {"gradient_norm", ref.gradient_norm},
                          {"iterations", ref.iterations},
                          {"tolerance", cfg.reference_tol}};
  json solvers = json::array();
  for (std::size_t s = 0; s < cfg.solvers.size(); ++s) {
    const ResolvedSolver& rs = result.solvers[s];
    json entry;
    entry["label"] = rs.label;
    entry["algorithm"] = to_string(rs.algorithm);
    entry["sampling"] = rs.scheme.describe();
    entry["b"] = rs.b;
    entry["expected_batch_size"] = rs.scheme.expected_batch_size();
    if (rs.algorithm == Algorithm::lsvrg_d) {
      entry["p"] = rs.p;
      entry["total_iters"] = rs.iterations;
    } else {
      entry["m"] = rs.m;
      entry["outer_iters"] = rs.iterations;
    }
    entry["alpha"] = rs.alpha;
    entry["expected_smoothness"] = rs.constants.expected_smoothness;
    entry["expected_residual"] = rs.constants.expected_residual;
    entry["predicted_complexity"] = number_or_null(rs.predicted_complexity);
    entry["epochs"] = cfg.solvers[s].epochs;
    entry["notes"] = rs.notes;
    json runs = json::array();
    for (const RunOutcome& o : result.runs) {
      if (o.label != rs.label) continue;
      json run;
      run["seed"] = o.seed;
      run["status"] = o.ok ? "ok" : "diverged";
      if (o.ok) {
        run["trace"] = o.trace_path.filename().string();
        run["grad_evals"] = o.grad_evals;
        run["final_suboptimality"] = number_or_null(o.final_suboptimality);
        run["final_dist_sq"] = number_or_null(o.final_dist_sq);
      } else {
        run["message"] = o.message;
      }
      runs.push_back(run);
    }
    entry["runs"] = runs;
    solvers.push_back(entry);
  }
  summary["solvers"] = solvers;
  result.summary_path = cfg.output_dir / "summary.json";
  std::ofstream out(result.summary_path);
  if (!out) throw std::runtime_error("cannot write '" + result.summary_path.string() + "'");
  out << summary.dump(2) << '\n';
  return result;
}

void print_tune_table(const TuneTable& table, std::ostream& out, bool csv) {
  if (csv) {
    out << "b,label,expected_smoothness,expected_residual,alpha,m_star,complexity\n";
    for (const TuneRow& r : table.rows) {
      out << r.b << ',' << r.label << ',' << format_number(r.expected_smoothness) << ','
          << format_number(r.expected_residual) << ',' << format_number(r.alpha) << ','
          << r.m_star << ',' << format_number(r.complexity) << '\n';
    }
    return;
  }
  out << std::left << std::setw(10) << "b" << std::setw(14) << "label" << std::setw(16) << "L(b)"
      << std::setw(16) << "rho(b)" << std::setw(16) << "alpha(b)" << std::setw(12) << "m*(b)"
      << "C_n(b)\n";
  for (const TuneRow& r : table.rows) {
    out << std::left << std::setw(10) << r.b << std::setw(14) << r.label << std::setw(16)
        << std::setprecision(8) << r.expected_smoothness << std::setw(16) << r.expected_residual
        << std::setw(16) << r.alpha << std::setw(12) << r.m_star << r.complexity << '\n';
  }
}

int cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Free-SVRG and L-SVRG-D under arbitrary sampling", "arbsvrg"};
  app.require_subcommand(1);

  std::string config_path;
  std::size_t workers = 0;
  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "INI experiment file")->required();
  run->add_option("--workers", workers, "Parallel (solver, seed) slots; default ARBSVRG_WORKERS or 1");

  std::string dataset;
  std::string loss = "ridge";
  double lambda = 0.1;
  double epsilon = 1e-4;
  bool scale = false;
  bool all_b = false;
  bool csv = false;
  std::size_t dimension = 0;
  std::size_t b = 1;
  const auto add_problem = [&](CLI::App* sub) {
    sub->add_option("--dataset", dataset, "LIBSVM path or synthetic:n=..,d=..,seed=..,kind=..,noise=..")
        ->required();
    sub->add_option("--loss", loss, "ridge or logistic")->capture_default_str();
    sub->add_option("--lambda", lambda, "Regularizer")->capture_default_str();
    sub->add_option("--dimension", dimension, "Feature dimension override for LIBSVM files");
    sub->add_flag("--scale", scale, "Scale every column to unit norm");
  };
  auto* tune = app.add_subcommand("tune", "Print the mini-batch tuning table");
  add_problem(tune);
  tune->add_option("--epsilon", epsilon, "Target accuracy in the complexity model")
      ->capture_default_str();
  tune->add_flag("--all-b", all_b, "One row per b in [1, n]");
  tune->add_flag("--csv", csv, "CSV output");

  auto* constants = app.add_subcommand("constants", "Print smoothness constants for b-nice sampling");
  add_problem(constants);
  constants->add_option("--b", b, "Mini-batch size")->required();

  SyntheticSpec spec;
  std::string kind = "regression";
  std::string output;
  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic dataset in LIBSVM format");
  gen->add_option("--n", spec.n, "Examples")->capture_default_str();
  gen->add_option("--d", spec.d, "Features")->capture_default_str();
  gen->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
  gen->add_option("--kind", kind, "regression or classification")->capture_default_str();
  gen->add_option("--noise", spec.noise, "Label noise")->capture_default_str();
  gen->add_option("--output", output, "Output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  const auto build_problem = [&] {
    DatasetSource source = parse_dataset_source(dataset);
    if (dimension > 0) source.dimension = dimension;
    const auto data = load_dataset(source, scale);
    if (!(lambda > 0.0)) throw ValidationError("lambda must be > 0");
    return LossModel(data, loss_family_from_string(loss), lambda);
  };

  try {
    if (*run) {
      const ExperimentConfig cfg = parse_config_file(config_path);
      const ExperimentResult result = run_experiment(cfg, workers);
      std::size_t failed = 0;
      for (const RunOutcome& o : result.runs) {
        if (!o.ok) {
          ++failed;
          err << "run " << o.label << " seed " << o.seed << " diverged: " << o.message << '\n';
        }
      }
      out << "wrote " << result.runs.size() - failed << " traces and " << result.summary_path.string()
          << '\n';
    } else if (*tune) {
      const LossModel model = build_problem();
      const SmoothnessProfile profile = smoothness_profile(model);
      const TuneTable table = tuning_table(profile, epsilon, all_b);
      if (!csv) {
        const BatchChoice over_b = optimal_batch_m_eq_n_over_b(profile);
        const BatchChoice lsvrgd = optimal_batch_lsvrgd(profile);
        out << std::setprecision(10) << "n = " << profile.n << ", L_max = " << profile.max_smoothness
            << ", L = " << profile.smoothness << ", mu = " << profile.strong_convexity << '\n'
            << "b* (Free-SVRG, m = n)     = " << table.optimum.b << "  [continuous "
            << table.optimum.continuous << "; " << table.optimum.regime << "]\n"
            << "b* (Free-SVRG, m = n/b)   = " << over_b.b << "  [" << over_b.regime << "]\n"
            << "b* (L-SVRG-D, p = 1/n)    = " << lsvrgd.b << "  [" << lsvrgd.regime << "]\n\n";
      }
      print_tune_table(table, out, csv);
    } else if (*constants) {
      const LossModel model = build_problem();
      const SmoothnessProfile profile = smoothness_profile(model);
      if (b < 1 || b > profile.n) throw ValidationError("--b must lie in [1, n]");
      const double bd = static_cast<double>(b);
      out << std::setprecision(17) << "n " << profile.n << '\n'
          << "b " << b << '\n'
          << "L_max " << profile.max_smoothness << '\n'
          << "L " << profile.smoothness << '\n'
          << "mu " << profile.strong_convexity << '\n'
          << "expected_smoothness " << bnice_expected_smoothness(bd, profile) << '\n'
          << "expected_residual " << bnice_expected_residual(bd, profile) << '\n'
          << "alpha " << step_size_free(bd, profile) << '\n'
          << "m_star " << optimal_loop(bd, profile) << '\n';
    } else if (*gen) {
      spec.kind = task_kind_from_string(kind);
      const Dataset ds = generate_synthetic(spec);
      write_libsvm(ds, output);
      out << "wrote " << ds.n() << " x " << ds.d() << " dataset to " << output << '\n';
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace arbsvrg
