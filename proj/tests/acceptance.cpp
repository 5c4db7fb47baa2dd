// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "isokal.hpp"
#include "support.hpp"

using namespace isokal;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Process CPU time; on a shared machine wall time also counts other tenants.
double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

double d(const Quad& x) { return to_double(x); }
double d(const Wide& x) { return to_double(x); }

struct Result {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Result& r) {
  std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): "
            << r.detail << std::endl;
  if (!r.pass) ++failures;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

// Worst observed ratio of (measured deviation / allowed deviation); <= 1 passes.
struct Worst {
  double ratio = 0;
  std::string where;
  void update(double dev, double allowed, const std::string& at) {
    const double r = allowed > 0 ? dev / allowed : (dev > 0 ? INFINITY : 0);
    if (!(r <= ratio)) {
      ratio = r;
      where = at;
    }
  }
  bool ok() const { return ratio <= 1.0; }
};

constexpr std::size_t kSystems = 200;
constexpr std::size_t kSteps = 30;
constexpr int kDirections = 50;

struct SystemChecks {
  Worst oracle, identity, monotone, lyap_decrease, lyap_floor, psi_step, psi_product, bracket;
  double oracle_seconds = 0;
  double oracle_cpu_seconds = 0;
  double total_seconds = 0;
  std::size_t d2_systems = 0;
};

SystemChecks check_random_systems() {
  SystemChecks c;
  const auto t_all = Clock::now();
  for (std::size_t n = 0; n < kSystems; ++n) {
    const auto sys = support::random_system<Wide>(n);
    const auto& m = sys.model;
    const auto dim = m.d();
    if (dim == 2) ++c.d2_systems;
    const std::string tag = "system " + std::to_string(n);

    // 1: recursion against the batch solution.
    const auto t_oracle = Clock::now();
    const double cpu_oracle = cpu_seconds();
    const auto y = simulate(m, sys.x0, kSteps, derive_seed(0xacce, n));
    const auto states = run(m, sys.x_hat0, sys.P0, y);
    const auto path = batch_wls_path(m, sys.x_hat0, sys.P0, y);
    for (std::size_t k = 0; k <= kSteps; ++k) {
      const Wide dev = Vector<Wide>(states[k].x_hat - path[k]).norm();
      c.oracle.update(d(dev), 1e-8 * (1 + d(path[k].norm())), tag + " k=" + std::to_string(k));
    }
    c.oracle_seconds += seconds_since(t_oracle);
    c.oracle_cpu_seconds += cpu_seconds() - cpu_oracle;

    const Matrix<Wide>& p0 = sys.P0;
    const Matrix<Wide> p0_inv = spd_inverse<Wide>(p0);
    const Wide p0_norm = lambda_max_sym<Wide>(p0);
    const Wide a_max = lambda_max_sym<Wide>(p0_inv), a_min = lambda_min_sym<Wide>(p0_inv);
    const auto grams = detail::gramian_sequence(m, kSteps);

    std::vector<Matrix<Wide>> p_inv(kSteps + 1);
    for (std::size_t k = 0; k <= kSteps; ++k) p_inv[k] = spd_inverse<Wide>(states[k].P);

    // 4: Lyapunov function along z(k) = Psi_k z(k-1) for random z0.
    NormalStream zr(derive_seed(0x2a, n));
    Matrix<Wide> z(dim, kDirections);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = Wide(zr.normal());
    auto values = [&](std::size_t k, const Matrix<Wide>& zz) {
      return Vector<Wide>((zz.cwiseProduct(p_inv[k] * zz)).colwise().sum().transpose());
    };
    Vector<Wide> v_prev = values(0, z);
    const Vector<Wide> v0 = v_prev;

    Matrix<Wide> product = identity<Wide>(dim);
    for (std::size_t k = 1; k <= kSteps; ++k) {
      const std::string at = tag + " k=" + std::to_string(k);
      const auto& pk = states[k].P;
      const auto& prev = states[k - 1];

      // 2: information form.
      const Matrix<Wide> expect = p0_inv + grams[k - 1];
      c.identity.update(d(Matrix<Wide>(p_inv[k] - expect).norm()), 1e-8 * d(p_inv[k].norm()), at);

      // 3: monotone covariances.
      c.monotone.update(d(lambda_max_sym<Wide>(Matrix<Wide>(pk - prev.P))), 1e-10 * d(p0.trace()),
                        at);

      // 5: Psi algebra.
      const Matrix<Wide> psi = psi_step(prev, m.noise(k - 1));
      const Matrix<Wide> ratio = psi_transition<Wide>(pk, prev.P);
      c.psi_step.update(d(Matrix<Wide>(psi - ratio).norm()), 1e-7 * (1 + d(spectral_norm<Wide>(ratio))),
                        at);
      product = psi * product;
      const Matrix<Wide> whole = psi_transition<Wide>(pk, p0);
      c.psi_product.update(d(Matrix<Wide>(product - whole).norm()),
                           1e-7 * (1 + d(spectral_norm<Wide>(whole))), at);

      z = psi * z;
      const Vector<Wide> v = values(k, z);
      for (int j = 0; j < kDirections; ++j) {
        c.lyap_decrease.update(std::max(0.0, d(v(j) - v_prev(j))), 1e-12 * d(v0(j)), at);
        const Wide floor = z.col(j).squaredNorm() / p0_norm;
        // V >= |z|^2 / |P0|, up to rounding in the last digits.
        c.lyap_floor.update(std::max(0.0, d(floor - v(j))), 1e-40 * d(floor) + 1e-300, at);
      }
      v_prev = v;

      // 7: bracketing of the covariance norm.
      const Wide o = lambda_min_sym<Wide>(grams[k - 1]);
      const Wide norm = lambda_max_sym<Wide>(pk);
      const Wide lower = 1 / (a_max + o), upper = 1 / (a_min + o);
      c.bracket.update(std::max(0.0, d(lower - norm)), 1e-8 * d(lower), at + " lower");
      c.bracket.update(std::max(0.0, d(norm - upper)), 1e-8 * d(upper), at + " upper");
    }
  }
  c.total_seconds = seconds_since(t_all);
  return c;
}

Result from_worst(const Worst& w, const std::string& what) {
  return {w.ok(), what + ", worst ratio to tolerance " + fmt(w.ratio) +
                      (w.where.empty() ? "" : " at " + w.where)};
}

Result regime_split() {
  std::ostringstream msg;
  bool pass = true;

  const auto ex1 = example_setup(ExampleId::Example1);
  const auto m1 = ex1.model.cast<Quad>();
  const auto c1 = propagate_covariance(m1, Matrix<Quad>(ex1.P0.cast<Quad>()), 40);
  std::vector<Quad> n1;
  for (const auto& p : c1) n1.push_back(lambda_max_sym<Quad>(p));
  bool strict = true;
  for (std::size_t k = 11; k < n1.size(); ++k) strict = strict && n1[k] < n1[k - 1];
  const auto fit = exponential_fit_window<Quad>(std::vector<Quad>(n1.begin() + 10, n1.end()), 10);
  const double shrink = d(n1[40] / n1[0]);
  pass = pass && strict && fit.beta > 0 && shrink <= 1e-3;
  msg << "example1 strictly decreasing(10..40)=" << (strict ? "yes" : "no") << " beta(10..40)="
      << fmt(d(fit.beta)) << " |P40|/|P0|=" << fmt(shrink);

  const auto ex2 = example_setup(ExampleId::Example2);
  const auto m2 = ex2.model.cast<Quad>();
  const auto c2 = propagate_covariance(m2, Matrix<Quad>(ex2.P0.cast<Quad>()), 40);
  std::vector<double> n2;
  for (const auto& p : c2) n2.push_back(d(lambda_max_sym<Quad>(p)));
  const double floor = *std::min_element(n2.begin(), n2.end());
  const auto [lo, hi] = std::minmax_element(n2.end() - 10, n2.end());
  const double plateau = *hi / *lo;
  pass = pass && floor >= 0.1 * n2[20] && plateau <= 1.01;
  msg << "; example2 min|P_k|/|P20|=" << fmt(floor / n2[20]) << " tail max/min=" << fmt(plateau);
  return {pass, msg.str()};
}

Result ensemble() {
  const auto t0 = Clock::now();
  const auto setup = example_setup(ExampleId::Example1);
  MonteCarloOptions opts;
  opts.threads = 0;
  const auto mc = monte_carlo(setup.model.cast<Quad>(), Vector<Quad>(setup.x0.cast<Quad>()),
                              Vector<Quad>(setup.x_hat0.cast<Quad>()),
                              Matrix<Quad>(setup.P0.cast<Quad>()), 40, 200, 0, opts);
  const double secs = seconds_since(t0);
  const auto& st = mc.stats;
  double worst_z = 0, worst_sample_z = 0;
  std::size_t at = 0;
  for (std::size_t k = 0; k <= 40; ++k) {
    const double dev = std::abs(st.spread[k] - st.mean_trace_P[k]);
    const double z = dev / st.spread_stderr_model[k];
    if (z > worst_z) {
      worst_z = z;
      at = k;
    }
    worst_sample_z = std::max(worst_sample_z, dev / st.spread_stderr[k]);
  }
  const double ratio = st.mse[40] / st.mse[1];
  const bool pass = worst_z <= 3 && ratio <= 0.1 && secs <= 60;
  return {pass, "N=200 seed 0, worst |spread - trace P| = " + fmt(worst_z) + " SE at k=" +
                    std::to_string(at) + " (sample-SE reading: " + fmt(worst_sample_z) +
                    "), mse40/mse1=" + fmt(ratio) + ", " + fmt(secs) + " s"};
}

// Roots of t^2 - tr t + det for a 2x2 matrix; magnitudes, descending.
std::vector<double> quadratic_root_magnitudes(const Matrix<double>& a) {
  const double tr = a.trace(), det = a.determinant();
  const double disc = tr * tr - 4 * det;
  if (disc < 0) {
    const double mag = std::sqrt(det);
    return {mag, mag};
  }
  const double q = -0.5 * (tr + std::copysign(std::sqrt(disc), tr));
  const double r1 = q, r2 = det / q;
  return {std::max(std::abs(r1), std::abs(r2)), std::min(std::abs(r1), std::abs(r2))};
}

Result gelfand(std::size_t& cross_checked) {
  const auto a = example_setup(ExampleId::Example1).model.dynamics(1).cast<Quad>().eval();
  const Quad lmin = eigen_magnitudes<Quad>(a).back();
  const auto rows = gelfand_diagnostic<Quad>(a, 60);
  const double rel = d(abs(rows.back().roots.back() - lmin) / lmin);

  // Dense eigensolver against characteristic-polynomial roots on 2x2 cases.
  double worst = 0;
  cross_checked = 0;
  std::vector<Matrix<double>> cases = {example_setup(ExampleId::Example2).model.dynamics(1)};
  for (std::size_t n = 0; n < kSystems; ++n) {
    const auto sys = support::random_system<double>(n);
    if (sys.model.d() == 2) cases.push_back(sys.model.dynamics(1));
  }
  for (const auto& c : cases) {
    const auto dense = eigen_magnitudes<double>(c);
    const auto poly = quadratic_root_magnitudes(c);
    for (int i = 0; i < 2; ++i) worst = std::max(worst, std::abs(dense[i] - poly[i]) / poly[i]);
    ++cross_checked;
  }
  const bool pass = rel <= 0.05 && worst <= 1e-8;
  return {pass, "|s_min(A^60)^(1/60) - lambda_min|/lambda_min = " + fmt(rel) + " (lambda_min=" +
                    fmt(d(lmin)) + "); eigensolver vs quadratic roots on " +
                    std::to_string(cross_checked) + " 2x2 cases, worst rel diff " + fmt(worst)};
}

Result determinism() {
  const fs::path base = fs::temp_directory_path() / "isokal_acceptance_determinism";
  fs::remove_all(base);
  auto invoke = [&](const std::string& sub) {
    const std::string cmd = std::string(ISOKAL_CLI) +
                            " --quiet --seed 42 reproduce example1 --trials 100 --outdir " +
                            (base / sub).string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  const auto t0 = Clock::now();
  const int a = invoke("a"), b = invoke("b");
  const double secs = seconds_since(t0);
  if (a != 0 || b != 0) {
    return {false, "reproduce exited with " + std::to_string(a) + "/" + std::to_string(b)};
  }
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(base / "a")) {
    if (entry.path().extension() != ".csv") continue;
    const auto other = base / "b" / entry.path().filename();
    if (read_text(entry.path().string()) != read_text(other.string())) {
      return {false, entry.path().filename().string() + " differs between runs"};
    }
    ++compared;
  }
  fs::remove_all(base);
  return {compared == 5, std::to_string(compared) + " CSV files byte-identical across two runs (" +
                             fmt(secs) + " s)"};
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  const auto c = check_random_systems();
  std::cout << "random systems: " << kSystems << " (d in 2..6, " << c.d2_systems << " with d=2), "
            << kSteps << " steps each, " << fmt(c.total_seconds) << " s" << std::endl;

  Result r1 = from_worst(c.oracle, "recursive vs batch, tol 1e-8");
  r1.detail += ", " + fmt(c.oracle_cpu_seconds) + " s cpu (" + fmt(c.oracle_seconds) + " s wall)";
  r1.pass = r1.pass && c.oracle_cpu_seconds <= 30;
  report(1, "oracle equivalence", r1);
  report(2, "covariance identity", from_worst(c.identity, "|P_k^-1 - P0^-1 - O(k,0)|, tol 1e-8"));
  report(3, "monotone covariances", from_worst(c.monotone, "lambda_max(P_k - P_k-1), tol 1e-10 tr P0"));
  {
    Result r = from_worst(c.lyap_decrease, "V non-increasing over 50 directions, slack 1e-12 V(0)");
    const Result floor = from_worst(c.lyap_floor, "V >= |z|^2/|P0|");
    r.pass = r.pass && floor.pass;
    r.detail += "; " + floor.detail;
    report(4, "Lyapunov decrement", r);
  }
  {
    Result r = from_worst(c.psi_step, "Psi_k vs P_k P_k-1^-1, tol 1e-7");
    const Result prod = from_worst(c.psi_product, "prod Psi_i vs P_k P0^-1, tol 1e-7");
    r.pass = r.pass && prod.pass;
    r.detail += "; " + prod.detail;
    report(5, "Psi algebra", r);
  }
  report(6, "regime split", regime_split());
  report(7, "norm bracketing", from_worst(c.bracket, "relative slack 1e-8"));
  report(8, "ensemble statistics", ensemble());
  std::size_t cross = 0;
  report(9, "Gelfand diagnostic", gelfand(cross));
  report(10, "determinism", determinism());

  std::cout << "total " << fmt(seconds_since(t0)) << " s, " << failures << " failing" << std::endl;
  return failures == 0 ? 0 : 1;
}
