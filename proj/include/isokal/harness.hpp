#pragma once

// Trajectory simulation, seeded Monte Carlo ensembles, and the two reference
// examples (a 4-state system with lambda_min(A) > 1 and a 2-state system with
// lambda_min(A) < 1).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "isokal/csv.hpp"
#include "isokal/error.hpp"
#include "isokal/estimator.hpp"
#include "isokal/linalg.hpp"
#include "isokal/model.hpp"
#include "isokal/random.hpp"

namespace isokal {

/// y(0..T-1) with y(k) = H~_k x0 + L_k g_k, L_k the Cholesky factor of R_k.
template <class S>
std::vector<Vector<S>> simulate(const SystemModel<S>& model, const Vector<S>& x0, std::size_t T,
                                NormalStream& rng, bool noiseless = false) {
  if (x0.size() != model.d()) throw DimensionError("x0 has the wrong length");
  if (auto t = model.observation_horizon(); t && T > *t) {
    throw HorizonError(std::to_string(T) + " steps exceed the model horizon of " +
                       std::to_string(*t));
  }
  std::vector<Vector<S>> out;
  out.reserve(T);
  Vector<S> x = x0;
  for (std::size_t k = 0; k < T; ++k) {
    if (k > 0) x = model.dynamics(k) * x;
    Vector<S> y = model.observation(k) * x;
    if (!noiseless) {
      Vector<S> g(model.m());
      for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = S(rng.normal());
      const Matrix<S> l = spd_factor<S>(model.noise(k), "R_" + std::to_string(k)).matrixL();
      y += l * g;
    }
    out.push_back(std::move(y));
  }
  return out;
}

template <class S>
std::vector<Vector<S>> simulate(const SystemModel<S>& model, const Vector<S>& x0, std::size_t T,
                                std::uint64_t seed, bool noiseless = false) {
  if (T == 0) throw Error("T must be at least 1");
  NormalStream rng(seed);
  return simulate(model, x0, T, rng, noiseless);
}

struct TrialStep {
  std::size_t k = 0;
  double err_sq = 0;   // ||e_k||^2, e_k = x^_k - x0
  double trace_P = 0;
  std::vector<double> p_eigs;  // descending
  double err_inf = 0;
};

struct TrialResult {
  std::size_t trial_id = 0;
  std::uint64_t seed = 0;
  std::vector<TrialStep> steps;  // k = 0..T
  std::vector<Vector<double>> errors;
};

/// Per-step ensemble statistics, k = 0..T.
struct EnsembleStats {
  std::size_t trials = 0;
  std::vector<double> mse;                // mean ||e_k||^2
  std::vector<Vector<double>> bias;       // mean e_k
  std::vector<double> bias_norm;          // ||mean e_k||
  std::vector<double> mean_trace_P;
  std::vector<double> spread;             // mse - ||bias||^2 = mean ||e_k - mean e_k||^2
  std::vector<double> spread_stderr;      // sample standard error of `spread`
  // Standard error of `spread` if e_k ~ N(0, P_k): sqrt(2 tr(P_k^2) / N).
  std::vector<double> spread_stderr_model;
};

struct MonteCarloOptions {
  bool noiseless = false;
  // Draw each trial's initial guess from N(x_hat0, P0), so that e_0 carries
  // the covariance the estimator assumes. Otherwise every trial starts at
  // x_hat0.
  bool sample_prior = true;
  unsigned threads = 1;  // 0 = hardware concurrency
};

struct MonteCarloResult {
  EnsembleStats stats;
  std::vector<TrialResult> trials;
};

template <class S>
TrialResult run_trial(const SystemModel<S>& model, const Vector<S>& x0, const Vector<S>& x_hat0,
                      const Matrix<S>& P0, std::size_t T, std::size_t trial_id,
                      std::uint64_t master_seed, const MonteCarloOptions& opts) {
  TrialResult tr;
  tr.trial_id = trial_id;
  tr.seed = derive_seed(master_seed, trial_id);
  NormalStream rng(tr.seed);
  Vector<S> guess = x_hat0;
  if (opts.sample_prior) {
    Vector<S> g(model.d());
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = S(rng.normal());
    guess += spd_factor<S>(P0, "P0").matrixL() * g;
  }
  const auto obs = simulate(model, x0, T, rng, opts.noiseless);
  const auto states = run(model, guess, P0, obs);
  for (const auto& s : states) {
    const Vector<S> e = s.x_hat - x0;
    TrialStep st;
    st.k = s.step;
    st.err_sq = to_double(Vector<S>(e).squaredNorm());
    st.trace_P = to_double(s.P.trace());
    const Vector<S> ev = sym_eigenvalues<S>(s.P);
    for (Eigen::Index i = 0; i < ev.size(); ++i) st.p_eigs.push_back(to_double(ev(i)));
    st.err_inf = to_double(e.cwiseAbs().maxCoeff());
    tr.steps.push_back(std::move(st));
    tr.errors.push_back(e.template cast<double>());
  }
  return tr;
}

/// Aggregates trials in trial-index order.
inline EnsembleStats aggregate(const std::vector<TrialResult>& trials) {
  EnsembleStats st;
  st.trials = trials.size();
  if (trials.empty()) return st;
  const std::size_t steps = trials.front().steps.size();
  const auto d = trials.front().errors.front().size();
  const double n = static_cast<double>(trials.size());
  for (std::size_t k = 0; k < steps; ++k) {
    double mse = 0, tr = 0;
    Vector<double> mean = Vector<double>::Zero(d);
    for (const auto& t : trials) {
      mse += t.steps[k].err_sq;
      tr += t.steps[k].trace_P;
      mean += t.errors[k];
    }
    mse /= n;
    tr /= n;
    mean /= n;
    std::vector<double> q;
    q.reserve(trials.size());
    double qmean = 0;
    for (const auto& t : trials) {
      q.push_back((t.errors[k] - mean).squaredNorm());
      qmean += q.back();
    }
    qmean /= n;
    double qvar = 0;
    for (double v : q) qvar += (v - qmean) * (v - qmean);
    qvar = trials.size() > 1 ? qvar / (n - 1) : 0.0;

    st.mse.push_back(mse);
    st.bias.push_back(mean);
    st.bias_norm.push_back(mean.norm());
    st.mean_trace_P.push_back(tr);
    st.spread.push_back(qmean);
    st.spread_stderr.push_back(std::sqrt(qvar / n));
    double tr_p2 = 0;
    for (double e : trials.front().steps[k].p_eigs) tr_p2 += e * e;
    st.spread_stderr_model.push_back(std::sqrt(2.0 * tr_p2 / n));
  }
  return st;
}

/// N independent simulate+run pairs. Trial t draws from its own stream
/// seeded with derive_seed(seed, t); results do not depend on `threads`.
template <class S>
MonteCarloResult monte_carlo(const SystemModel<S>& model, const Vector<S>& x0,
                             const Vector<S>& x_hat0, const Matrix<S>& P0, std::size_t T,
                             std::size_t trials, std::uint64_t seed,
                             const MonteCarloOptions& opts = {}) {
  if (trials == 0) throw Error("at least one trial is required");
  if (T == 0) throw Error("T must be at least 1");
  MonteCarloResult out;
  out.trials.resize(trials);

  unsigned workers = opts.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                       : opts.threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, trials));
  if (workers <= 1) {
    for (std::size_t t = 0; t < trials; ++t) {
      out.trials[t] = run_trial(model, x0, x_hat0, P0, T, t, seed, opts);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> failures(workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t t = next++; t < trials; t = next++) {
            out.trials[t] = run_trial(model, x0, x_hat0, P0, T, t, seed, opts);
          }
        } catch (...) {
          failures[w] = std::current_exception();
          next = trials;
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }
  }
  out.stats = aggregate(out.trials);
  return out;
}

enum class ExampleId { Example1, Example2 };

/// The two reference set-ups with their true states, initial guesses and
/// snapshot steps.
struct ExampleSetup {
  ExampleId id = ExampleId::Example1;
  std::string name;
  SystemModel<double> model;
  Vector<double> x0;
  Vector<double> x_hat0;
  Matrix<double> P0;
  double sigma = 0;  // as quoted for the example
  std::size_t steps = 40;
  std::vector<std::size_t> snapshots;
};

/// `sigma_is_variance` selects R = sigma * I instead of the default
/// R = sigma^2 * I.
inline ExampleSetup example_setup(ExampleId id, bool sigma_is_variance = false) {
  Matrix<double> a, h;
  Vector<double> x0, xh;
  double sigma = 0;
  std::vector<std::size_t> snaps;
  std::string name;
  if (id == ExampleId::Example1) {
    name = "example1";
    a.resize(4, 4);
    a << 1.99, -0.32, 0.00, 0.07,
         0.43, 1.17, 0.02, 0.00,
         0.13, -0.09, 1.52, -0.13,
         0.28, -0.14, 0.03, 1.22;
    h.resize(2, 4);
    h << 1, 0, 0, 0,
         0, 0, 1, 0;
    x0.resize(4);
    x0 << 0.2, 0.4, 0.5, 0.3;
    xh.resize(4);
    xh << 0.376, 0.502, 0.421, 0.366;
    sigma = 0.01;
    snaps = {5, 10, 40};
  } else {
    name = "example2";
    a.resize(2, 2);
    a << 1.0, -0.5,
         -0.5, 1.0;
    h.resize(1, 2);
    h << 0, 1;
    x0.resize(2);
    x0 << 0.83053274, 0.35472554;
    xh.resize(2);
    xh << 0.99065169, 0.19889222;
    sigma = 0.001;
    snaps = {2, 5, 20};
  }
  const double sigma2 = sigma_is_variance ? sigma : sigma * sigma;
  const auto d = a.rows();
  return ExampleSetup{id,
                      name,
                      SystemModel<double>::lti(a, h, sigma2),
                      x0,
                      xh,
                      1e-2 * identity<double>(d),
                      sigma,
                      40,
                      snaps};
}

struct ReproduceOutput {
  std::vector<std::string> files;
  EnsembleStats stats;
  std::vector<Vector<double>> reference_estimates;  // k = 0..T
  std::vector<std::vector<double>> p_eigs;           // k = 0..T, descending
};

/// Runs one example and writes
///   observations.csv  reference trajectory (stream `seed`)
///   estimates.csv     estimates from the quoted initial guess on it
///   snapshots.csv     estimate vs truth at the snapshot steps
///   mse.csv           ensemble statistics, k = 1..T (`trials` runs)
///   p_eigs.csv        eigenvalues of P_k, k = 0..T
template <class S>
ReproduceOutput reproduce_example(ExampleId id, std::size_t trials, std::uint64_t seed,
                                  const std::string& out_dir, bool sigma_is_variance = false,
                                  unsigned threads = 1) {
  namespace fs = std::filesystem;
  const ExampleSetup setup = example_setup(id, sigma_is_variance);
  const SystemModel<S> model = setup.model.template cast<S>();
  const Vector<S> x0 = setup.x0.template cast<S>();
  const Vector<S> xh = setup.x_hat0.template cast<S>();
  const Matrix<S> p0 = setup.P0.template cast<S>();
  const auto d = static_cast<std::size_t>(model.d());
  const auto m = static_cast<std::size_t>(model.m());
  const std::size_t T = setup.steps;

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw IoError("cannot create output directory '" + out_dir + "'");
  }

  ReproduceOutput out;
  const auto obs = simulate(model, x0, T, seed);
  const auto states = run(model, xh, p0, obs);

  CsvTable obs_csv;
  obs_csv.header = {"k"};
  for (auto& n : indexed_names("y_", m)) obs_csv.header.push_back(n);
  for (std::size_t k = 0; k < obs.size(); ++k) {
    std::vector<double> row{static_cast<double>(k)};
    for (Eigen::Index i = 0; i < obs[k].size(); ++i) row.push_back(to_double(obs[k](i)));
    obs_csv.rows.push_back(std::move(row));
  }

  CsvTable est_csv;
  est_csv.header = {"k"};
  for (auto& n : indexed_names("xhat_", d)) est_csv.header.push_back(n);
  est_csv.header.push_back("trace_P");
  est_csv.header.push_back("err_norm");
  CsvTable eig_csv;
  eig_csv.header = {"k"};
  for (auto& n : indexed_names("eig_", d, 1)) eig_csv.header.push_back(n);
  for (const auto& s : states) {
    std::vector<double> row{static_cast<double>(s.step)};
    for (Eigen::Index i = 0; i < s.x_hat.size(); ++i) row.push_back(to_double(s.x_hat(i)));
    row.push_back(to_double(s.P.trace()));
    row.push_back(to_double(Vector<S>(s.x_hat - x0).norm()));
    est_csv.rows.push_back(std::move(row));
    out.reference_estimates.push_back(s.x_hat.template cast<double>());

    const Vector<S> ev = sym_eigenvalues<S>(s.P);
    std::vector<double> eigs;
    for (Eigen::Index i = 0; i < ev.size(); ++i) eigs.push_back(to_double(ev(i)));
    std::vector<double> erow{static_cast<double>(s.step)};
    erow.insert(erow.end(), eigs.begin(), eigs.end());
    eig_csv.rows.push_back(std::move(erow));
    out.p_eigs.push_back(std::move(eigs));
  }

  CsvTable snap_csv;
  snap_csv.header = {"k"};
  for (auto& n : indexed_names("xhat_", d)) snap_csv.header.push_back(n);
  for (auto& n : indexed_names("x0_", d)) snap_csv.header.push_back(n);
  for (std::size_t k : setup.snapshots) {
    std::vector<double> row{static_cast<double>(k)};
    for (Eigen::Index i = 0; i < states[k].x_hat.size(); ++i) {
      row.push_back(to_double(states[k].x_hat(i)));
    }
    for (Eigen::Index i = 0; i < setup.x0.size(); ++i) row.push_back(setup.x0(i));
    snap_csv.rows.push_back(std::move(row));
  }

  MonteCarloOptions opts;
  opts.threads = threads;
  const auto mc = monte_carlo(model, x0, xh, p0, T, trials, seed, opts);
  out.stats = mc.stats;
  CsvTable mse_csv;
  mse_csv.header = {"k", "mse", "bias_norm", "mean_trace_P"};
  for (std::size_t k = 1; k <= T; ++k) {
    mse_csv.rows.push_back({static_cast<double>(k), mc.stats.mse[k], mc.stats.bias_norm[k],
                            mc.stats.mean_trace_P[k]});
  }

  const fs::path dir(out_dir);
  const std::vector<std::pair<std::string, const CsvTable*>> files = {
      {"observations.csv", &obs_csv}, {"estimates.csv", &est_csv}, {"snapshots.csv", &snap_csv},
      {"mse.csv", &mse_csv},          {"p_eigs.csv", &eig_csv}};
  for (const auto& [name, table] : files) {
    const std::string path = (dir / name).string();
    write_csv(path, *table);
    out.files.push_back(path);
  }
  return out;
}

}  // namespace isokal
