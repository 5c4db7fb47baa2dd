// isokal: initial-state estimation and error-dynamics analysis from the
// command line.
//
//   isokal simulate  --config C --x0 v,... --steps T --out FILE [--noiseless]
//   isokal estimate  --config C --obs FILE --p0 P --out FILE [--x0-guess v,...]
//                    [--truth v,...] [--batch-check]
//   isokal analyze   --config C --horizon L --k-max K --out FILE.json [--p0 P]
//   isokal reproduce example1|example2 --trials N --outdir DIR [--sigma-is-variance]
//
// Global: --seed S (default 0), --quiet, --precision quad|double|wide.
// Exit codes: 0 ok, 1 invalid input/config, 2 IO, 3 batch-check deviation.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "isokal.hpp"

#ifndef ISOKAL_VERSION
#define ISOKAL_VERSION "0.0.0"
#endif

namespace {

namespace fs = std::filesystem;
using isokal::Matrix;
using isokal::Vector;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitIo = 2;
constexpr int kExitBatchCheck = 3;
constexpr double kBatchCheckLimit = 1e-6;

struct GlobalOptions {
  std::uint64_t seed = 0;
  bool quiet = false;
  std::string precision = "quad";
  std::vector<std::string> argv;
};

/// Comma-separated decimal literals.
Vector<double> parse_vector(const std::string& text, const std::string& flag) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw isokal::Error(flag + ": '" + item + "' is not a number");
    }
    while (used < item.size() && item[used] == ' ') ++used;
    if (used != item.size() || !std::isfinite(v)) {
      throw isokal::Error(flag + ": '" + item + "' is not a finite number");
    }
    vals.push_back(v);
  }
  if (vals.empty()) throw isokal::Error(flag + ": empty vector");
  return Eigen::Map<Vector<double>>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

void require_length(const Vector<double>& v, Eigen::Index d, const std::string& flag) {
  if (v.size() != d) {
    throw isokal::DimensionError(flag + ": expected " + std::to_string(d) + " entries, got " +
                                 std::to_string(v.size()));
  }
}

/// A scalar p (meaning p * I) or a JSON file holding a d x d matrix.
Matrix<double> parse_p0(const std::string& text, Eigen::Index d) {
  std::size_t used = 0;
  try {
    const double p = std::stod(text, &used);
    if (used == text.size()) {
      if (!(p > 0) || !std::isfinite(p)) throw isokal::Error("--p0: scalar must be positive");
      return p * isokal::identity<double>(d);
    }
  } catch (const std::invalid_argument&) {
  } catch (const std::out_of_range&) {
    throw isokal::Error("--p0: value out of range");
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(isokal::read_text(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw isokal::Error("--p0: malformed JSON in '" + text + "': " + e.what());
  }
  Matrix<double> p = isokal::detail::parse_matrix(doc, "--p0");
  if (p.rows() != d || p.cols() != d) {
    throw isokal::DimensionError("--p0: expected a " + std::to_string(d) + "x" +
                                 std::to_string(d) + " matrix");
  }
  return p;
}

unsigned threads_from_env() {
  const char* env = std::getenv("ISOKAL_THREADS");
  if (!env || !*env) return 0;
  try {
    const long v = std::stol(env);
    return v < 0 ? 0u : static_cast<unsigned>(v);
  } catch (const std::exception&) {
    throw isokal::Error("ISOKAL_THREADS: '" + std::string(env) + "' is not an integer");
  }
}

std::string absolute(const std::string& p) {
  if (p.empty()) return p;
  std::error_code ec;
  auto a = fs::absolute(p, ec);
  return ec ? p : a.lexically_normal().string();
}

/// Record of one invocation, written next to its outputs.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  std::string precision;
  double duration_seconds = 0;

  void write(const std::string& path, const GlobalOptions& g) const {
    nlohmann::json j;
    j["command"] = command;
    j["arguments"] = g.argv;
    j["config"] = config_path.empty() ? nlohmann::json(nullptr) : nlohmann::json(config_path);
    j["seed"] = seed;
    j["outputs"] = outputs;
    j["precision"] = precision;
    j["tool_version"] = ISOKAL_VERSION;
    j["wall_clock_seconds"] = duration_seconds;
    isokal::write_text(path, j.dump(2) + "\n");
  }
};

template <class S>
void write_observations(const std::string& path, const std::vector<Vector<S>>& obs,
                        Eigen::Index m) {
  isokal::CsvTable t;
  t.header = {"k"};
  for (auto& n : isokal::indexed_names("y_", static_cast<std::size_t>(m))) t.header.push_back(n);
  for (std::size_t k = 0; k < obs.size(); ++k) {
    std::vector<double> row{static_cast<double>(k)};
    for (Eigen::Index i = 0; i < obs[k].size(); ++i) row.push_back(isokal::to_double(obs[k](i)));
    t.rows.push_back(std::move(row));
  }
  isokal::write_csv(path, t);
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  std::string config, x0, out;
  std::size_t steps = 0;
  bool noiseless = false;
};

template <class S>
int cmd_simulate(const SimulateOptions& o, const GlobalOptions& g) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto model = isokal::load_model_file(o.config).template cast<S>();
  const Vector<double> x0 = parse_vector(o.x0, "--x0");
  require_length(x0, model.d(), "--x0");
  const auto obs = isokal::simulate(model, Vector<S>(x0.cast<S>()), o.steps, g.seed, o.noiseless);
  write_observations(o.out, obs, model.m());

  RunManifest man{"simulate", absolute(o.config), g.seed, {absolute(o.out)}, g.precision, 0};
  man.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  man.write(o.out + ".manifest.json", g);
  if (!g.quiet) std::cout << "wrote " << obs.size() << " observations to " << o.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- estimate

struct EstimateOptions {
  std::string config, obs, x0_guess, p0, out, truth;
  bool batch_check = false;
};

template <class S>
int cmd_estimate(const EstimateOptions& o, const GlobalOptions& g) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto model = isokal::load_model_file(o.config).template cast<S>();
  const auto d = model.d();
  Vector<double> guess = Vector<double>::Zero(d);
  if (!o.x0_guess.empty()) {
    guess = parse_vector(o.x0_guess, "--x0-guess");
    require_length(guess, d, "--x0-guess");
  }
  std::optional<Vector<double>> truth;
  if (!o.truth.empty()) {
    truth = parse_vector(o.truth, "--truth");
    require_length(*truth, d, "--truth");
  }
  const Matrix<S> p0 = parse_p0(o.p0, d).template cast<S>();
  const auto raw = isokal::parse_observations(isokal::read_text(o.obs), model.m(), o.obs);
  std::vector<Vector<S>> obs;
  for (const auto& y : raw) obs.push_back(y.template cast<S>());

  const Vector<S> xh0 = guess.cast<S>();
  const auto states = isokal::run(model, xh0, p0, obs);

  isokal::CsvTable t;
  t.header = {"k"};
  for (auto& n : isokal::indexed_names("xhat_", static_cast<std::size_t>(d))) t.header.push_back(n);
  t.header.push_back("trace_P");
  if (truth) t.header.push_back("err_norm");
  for (const auto& s : states) {
    std::vector<double> row{static_cast<double>(s.step)};
    for (Eigen::Index i = 0; i < d; ++i) row.push_back(isokal::to_double(s.x_hat(i)));
    row.push_back(isokal::to_double(s.P.trace()));
    if (truth) {
      row.push_back(isokal::to_double(Vector<S>(s.x_hat - truth->cast<S>()).norm()));
    }
    t.rows.push_back(std::move(row));
  }
  isokal::write_csv(o.out, t);

  int code = kExitOk;
  if (o.batch_check) {
    const auto batch = isokal::batch_wls_path(model, xh0, p0, obs);
    double worst = 0;
    for (std::size_t k = 0; k < states.size(); ++k) {
      const S dev = (states[k].x_hat - batch[k]).norm() / (S(1) + batch[k].norm());
      worst = std::max(worst, isokal::to_double(dev));
    }
    std::cout << "batch-check max relative deviation: " << isokal::format_number(worst) << "\n";
    if (!(worst <= kBatchCheckLimit)) {
      std::cerr << "batch-check failed: deviation exceeds " << kBatchCheckLimit << "\n";
      code = kExitBatchCheck;
    }
  }

  RunManifest man{"estimate", absolute(o.config), g.seed, {absolute(o.out)}, g.precision, 0};
  man.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  man.write(o.out + ".manifest.json", g);
  if (!g.quiet) std::cout << "wrote " << states.size() << " estimates to " << o.out << "\n";
  return code;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeOptions {
  std::string config, out, p0 = "1e-2";
  std::size_t horizon = 0;
  std::size_t k_max = 0;
};

template <class S>
int cmd_analyze(const AnalyzeOptions& o, const GlobalOptions& g) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto model = isokal::load_model_file(o.config).template cast<S>();
  const Matrix<S> p0 = parse_p0(o.p0, model.d()).template cast<S>();

  auto obs = isokal::check_observability(model, o.horizon, S(0));
  std::size_t k_max = o.k_max;
  if (auto t = model.observation_horizon()) k_max = std::min(k_max, *t);
  if (model.is_lti() && obs.verdict == isokal::Verdict::Observable && k_max >= 2) {
    const auto growth = isokal::lambda_min_asymptotics(model, k_max);
    obs.growth_class = growth.growth_class;
    obs.growth_limit = growth.limit;
    obs.beta_fit = growth.beta_fit;
    obs.lambda_min_trace = growth.lambda_min_trace;
  }
  const auto covs = isokal::propagate_covariance(model, p0, k_max);
  const auto stab = isokal::analyze_stability(model, covs);

  nlohmann::json j = isokal::analysis_json(obs, stab);
  isokal::write_text(o.out, j.dump(2) + "\n");

  RunManifest man{"analyze", absolute(o.config), g.seed, {absolute(o.out)}, g.precision, 0};
  man.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  man.write(o.out + ".manifest.json", g);
  if (!g.quiet) {
    std::cout << "verdict: " << j["verdict"].get<std::string>() << ", classification: "
              << (j["classification"].is_null() ? "n/a" : j["classification"].get<std::string>())
              << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- reproduce

struct ReproduceOptions {
  std::string which, outdir;
  std::size_t trials = 100;
  bool sigma_is_variance = false;
};

template <class S>
int cmd_reproduce(const ReproduceOptions& o, const GlobalOptions& g) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto id = o.which == "example1" ? isokal::ExampleId::Example1 : isokal::ExampleId::Example2;
  const auto res = isokal::reproduce_example<S>(id, o.trials, g.seed, o.outdir,
                                                o.sigma_is_variance, threads_from_env());
  RunManifest man{"reproduce " + o.which, "", g.seed, {}, g.precision, 0};
  for (const auto& f : res.files) man.outputs.push_back(absolute(f));
  man.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  man.write((fs::path(o.outdir) / "manifest.json").string(), g);
  if (!g.quiet) {
    std::cout << o.which << ": " << o.trials << " trials, mse(k=1)="
              << isokal::format_number(res.stats.mse[1])
              << " mse(k=40)=" << isokal::format_number(res.stats.mse.back()) << "\n";
  }
  return kExitOk;
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const isokal::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const isokal::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

template <class Fn>
int dispatch(const GlobalOptions& g, Fn&& fn) {
  return guarded([&] {
    if (g.precision == "double") return fn(double{});
    if (g.precision == "wide") return fn(isokal::Wide{});
    return fn(isokal::Quad{});
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recursive initial-state estimation and error-dynamics analysis"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  for (int i = 0; i < argc; ++i) g.argv.emplace_back(argv[i]);
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_flag("--quiet", g.quiet, "Suppress informational output");
  app.add_option("--precision", g.precision, "Arithmetic: quad, double or wide (50 digits)")
      ->check(CLI::IsMember({"quad", "double", "wide"}))
      ->capture_default_str();

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Generate noisy observations");
  simulate->add_option("--config", sim.config, "System configuration (JSON)")->required();
  simulate->add_option("--x0", sim.x0, "True initial state, comma separated")->required();
  simulate->add_option("--steps", sim.steps, "Number of observations")
      ->required()
      ->check(CLI::PositiveNumber);
  simulate->add_option("--out", sim.out, "Output observations.csv")->required();
  simulate->add_flag("--noiseless", sim.noiseless, "Emit y(k) = H~_k x0 exactly");

  EstimateOptions est;
  auto* estimate = app.add_subcommand("estimate", "Estimate x0 from an observations file");
  estimate->add_option("--config", est.config, "System configuration (JSON)")->required();
  estimate->add_option("--obs", est.obs, "Observations CSV")->required();
  estimate->add_option("--x0-guess", est.x0_guess, "Initial guess (default 0)");
  estimate->add_option("--p0", est.p0, "Initial covariance: scalar p (p*I) or JSON matrix file")
      ->required();
  estimate->add_option("--out", est.out, "Output estimates.csv")->required();
  estimate->add_option("--truth", est.truth, "True x0, adds the err_norm column");
  estimate->add_flag("--batch-check", est.batch_check,
                     "Compare against the batch least-squares solution");

  AnalyzeOptions ana;
  auto* analyze = app.add_subcommand("analyze", "Observability and stability report");
  analyze->add_option("--config", ana.config, "System configuration (JSON)")->required();
  analyze->add_option("--horizon", ana.horizon, "Largest observability window L_max")
      ->required()
      ->check(CLI::PositiveNumber);
  analyze->add_option("--k-max", ana.k_max, "Number of steps to trace")
      ->required()
      ->check(CLI::PositiveNumber);
  analyze->add_option("--out", ana.out, "Output report (JSON)")->required();
  analyze->add_option("--p0", ana.p0, "Initial covariance for the traces")->capture_default_str();

  ReproduceOptions rep;
  auto* reproduce = app.add_subcommand("reproduce", "Run a reference example");
  reproduce->add_option("example", rep.which, "example1 or example2")
      ->required()
      ->check(CLI::IsMember({"example1", "example2"}));
  reproduce->add_option("--trials", rep.trials, "Monte Carlo trials")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  reproduce->add_option("--outdir", rep.outdir, "Output directory")->required();
  reproduce->add_flag("--sigma-is-variance", rep.sigma_is_variance,
                      "Read the quoted sigma as a variance instead of a standard deviation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitInput;
  }

  if (*simulate) return dispatch(g, [&](auto s) { return cmd_simulate<decltype(s)>(sim, g); });
  if (*estimate) return dispatch(g, [&](auto s) { return cmd_estimate<decltype(s)>(est, g); });
  if (*analyze) return dispatch(g, [&](auto s) { return cmd_analyze<decltype(s)>(ana, g); });
  return dispatch(g, [&](auto s) { return cmd_reproduce<decltype(s)>(rep, g); });
}
