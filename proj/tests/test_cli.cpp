#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "isokal.hpp"

namespace fs = std::filesystem;
using namespace isokal;

namespace {

const std::string kSource = ISOKAL_SOURCE_DIR;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("isokal_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  Outcome run(const std::string& args) const {
    const std::string out = path("stdout.txt"), err = path("stderr.txt");
    const std::string cmd =
        std::string(ISOKAL_CLI) + " " + args + " >" + out + " 2>" + err;
    const int status = std::system(cmd.c_str());
    Outcome o;
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.out = read_text(out);
    o.err = read_text(err);
    return o;
  }

  std::vector<std::vector<double>> rows(const std::string& file) const {
    std::istringstream in(read_text(file));
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<double>> out;
    while (std::getline(in, line)) {
      std::vector<double> r;
      for (const auto& c : split_csv_line(line)) r.push_back(std::stod(c));
      out.push_back(std::move(r));
    }
    return out;
  }

  fs::path dir_;
};

const std::string kEx1 = kSource + "/configs/example1.json";
const std::string kEx2 = kSource + "/configs/example2.json";

}  // namespace

TEST_F(Cli, SimulateWritesOneRowPerStep) {
  const auto o = run("--seed 7 simulate --config " + kEx2 + " --x0 0.83,0.35 --steps 3 --out " +
                     path("obs.csv"));
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(rows(path("obs.csv")).size(), 3u);
  EXPECT_TRUE(fs::exists(path("obs.csv.manifest.json")));
  const auto man = nlohmann::json::parse(read_text(path("obs.csv.manifest.json")));
  EXPECT_EQ(man["seed"], 7);
  EXPECT_EQ(man["command"], "simulate");
}

TEST_F(Cli, SimulateMissingX0) {
  const auto o = run("simulate --config " + kEx2 + " --steps 3 --out " + path("obs.csv"));
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("--x0"), std::string::npos);
  EXPECT_NE(o.err.find("Usage"), std::string::npos);
}

TEST_F(Cli, SimulateNoiselessMatchesModel) {
  const auto o = run("simulate --config " + kEx1 + " --x0 0.2,0.4,0.5,0.3 --steps 12 --noiseless --out " +
                     path("obs.csv"));
  ASSERT_EQ(o.code, 0) << o.err;
  const auto model = load_model_file(kEx1);
  Vector<double> x0(4);
  x0 << 0.2, 0.4, 0.5, 0.3;
  const auto r = rows(path("obs.csv"));
  ASSERT_EQ(r.size(), 12u);
  for (std::size_t k = 0; k < r.size(); ++k) {
    const Vector<double> y = observed_evolution(model, k) * x0;
    EXPECT_EQ(r[k][0], static_cast<double>(k));
    for (Eigen::Index i = 0; i < 2; ++i) {
      EXPECT_NEAR(r[k][static_cast<std::size_t>(i) + 1], y(i), 1e-14 * (1 + std::abs(y(i))));
    }
  }
}

TEST_F(Cli, SimulateErrors) {
  EXPECT_EQ(run("simulate --config " + kEx2 + " --x0 1,2,3 --steps 3 --out " + path("o.csv")).code, 1);
  EXPECT_EQ(run("simulate --config " + kEx2 + " --x0 1,abc --steps 3 --out " + path("o.csv")).code, 1);
  EXPECT_EQ(run("simulate --config /nonexistent.json --x0 1,2 --steps 3 --out " + path("o.csv")).code, 2);
  EXPECT_EQ(run("simulate --config " + kEx2 + " --x0 1,2 --steps 3 --out /nonexistent/dir/o.csv").code, 2);
  std::ofstream(path("bad.json")) << R"({"d": 2, "m": 3})";
  const auto o = run("simulate --config " + path("bad.json") + " --x0 1,2 --steps 3 --out " + path("o.csv"));
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("/m"), std::string::npos);
}

TEST_F(Cli, EstimateEmptyObservations) {
  std::ofstream(path("obs.csv")) << "k,y_0\n";
  const auto o = run("estimate --config " + kEx2 + " --obs " + path("obs.csv") +
                     " --x0-guess 0.99,0.2 --p0 1e-2 --out " + path("est.csv"));
  ASSERT_EQ(o.code, 0) << o.err;
  const auto r = rows(path("est.csv"));
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0][1], 0.99);
  EXPECT_EQ(r[0][2], 0.2);
}

TEST_F(Cli, Example1Pipeline) {
  ASSERT_EQ(run("--seed 3 simulate --config " + kEx1 +
                " --x0 0.2,0.4,0.5,0.3 --steps 40 --out " + path("obs.csv")).code, 0);
  const auto o = run("estimate --config " + kEx1 + " --obs " + path("obs.csv") +
                     " --x0-guess 0.376,0.502,0.421,0.366 --p0 1e-2 --truth 0.2,0.4,0.5,0.3"
                     " --batch-check --out " + path("est.csv"));
  ASSERT_EQ(o.code, 0) << o.err;
  const auto r = rows(path("est.csv"));
  ASSERT_EQ(r.size(), 41u);
  EXPECT_LT(r.back()[6], r.front()[6]);
  const auto pos = o.out.find("deviation: ");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_LE(std::stod(o.out.substr(pos + 11)), 1e-8);
}

TEST_F(Cli, EstimateMatrixP0) {
  std::ofstream(path("p0.json")) << "[[0.01, 0], [0, 0.02]]";
  std::ofstream(path("obs.csv")) << "k,y_0\n0,0.3\n1,0.1\n";
  const auto o = run("estimate --config " + kEx2 + " --obs " + path("obs.csv") + " --p0 " +
                     path("p0.json") + " --out " + path("est.csv"));
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NEAR(rows(path("est.csv"))[0][3], 0.03, 1e-15);
}

TEST_F(Cli, EstimateErrors) {
  std::ofstream(path("obs.csv")) << "k,y_0\n0,0.3\n";
  std::ofstream(path("bad.csv")) << "k,y_0\n1,0.3\n";
  const std::string base = "estimate --config " + kEx2 + " --out " + path("est.csv");
  EXPECT_EQ(run(base + " --obs " + path("obs.csv")).code, 1);  // --p0 missing
  EXPECT_EQ(run(base + " --obs " + path("obs.csv") + " --p0 -1").code, 1);
  EXPECT_EQ(run(base + " --obs " + path("bad.csv") + " --p0 1").code, 1);
  EXPECT_EQ(run(base + " --obs " + path("missing.csv") + " --p0 1").code, 2);
  EXPECT_EQ(run(base + " --obs " + path("obs.csv") + " --p0 1 --x0-guess 1").code, 1);
}

TEST_F(Cli, AnalyzeExample2) {
  const auto o = run("analyze --config " + kEx2 + " --horizon 10 --k-max 40 --out " + path("a.json"));
  ASSERT_EQ(o.code, 0) << o.err;
  const auto j = nlohmann::json::parse(read_text(path("a.json")));
  EXPECT_EQ(j["classification"], "LyapunovStableOnly");
  EXPECT_EQ(j["verdict"], "Observable");
  EXPECT_EQ(j["L"], 2);
  EXPECT_EQ(j["growth_class"], "BoundedLimit");
  EXPECT_EQ(j["p_norm_trace"].size(), 41u);
  EXPECT_TRUE(j["lyapunov_monotone"].get<bool>());
}

TEST_F(Cli, AnalyzeExample1) {
  const auto o = run("analyze --config " + kEx1 + " --horizon 10 --k-max 40 --out " + path("a.json"));
  ASSERT_EQ(o.code, 0) << o.err;
  const auto j = nlohmann::json::parse(read_text(path("a.json")));
  EXPECT_EQ(j["classification"], "UniformlyAsymptoticallyStable");
  EXPECT_EQ(j["growth_class"], "Unbounded");
  EXPECT_GT(j["beta"].get<double>(), 0.0);
  EXPECT_EQ(j["eigs_abs"].size(), 4u);
}

TEST_F(Cli, AnalyzeUnobservable) {
  const auto o = run("analyze --config " + kSource + "/configs/unobservable.json --horizon 10 --k-max 20 --out " +
                     path("a.json"));
  ASSERT_EQ(o.code, 0) << o.err;
  const auto j = nlohmann::json::parse(read_text(path("a.json")));
  EXPECT_EQ(j["verdict"], "NotObservableUpTo");
  EXPECT_TRUE(j["classification"].is_null());
}

TEST_F(Cli, AnalyzeTimeVarying) {
  const auto o = run("analyze --config " + kSource + "/configs/ltv_rotation.json --horizon 6 --k-max 20 --out " +
                     path("a.json"));
  ASSERT_EQ(o.code, 0) << o.err;
  const auto j = nlohmann::json::parse(read_text(path("a.json")));
  EXPECT_EQ(j["certified_horizon"], 6);
  EXPECT_EQ(j["p_norm_trace"].size(), 7u);
}

TEST_F(Cli, ReproduceExample1) {
  const auto o = run("--seed 1 reproduce example1 --trials 100 --outdir " + path("ex1"));
  ASSERT_EQ(o.code, 0) << o.err;
  const auto r = rows(path("ex1/mse.csv"));
  ASSERT_EQ(r.size(), 40u);
  for (std::size_t i = 1; i < r.size(); ++i) EXPECT_LE(r[i][3], r[i - 1][3]);
  EXPECT_TRUE(fs::exists(path("ex1/manifest.json")));
}

TEST_F(Cli, ReproduceExample2Plateau) {
  const auto o = run("reproduce example2 --trials 20 --outdir " + path("ex2"));
  ASSERT_EQ(o.code, 0) << o.err;
  const auto r = rows(path("ex2/p_eigs.csv"));
  ASSERT_EQ(r.size(), 41u);
  double lo = 1e300, hi = 0;
  for (std::size_t k = r.size() - 10; k < r.size(); ++k) {
    lo = std::min(lo, r[k][1]);
    hi = std::max(hi, r[k][1]);
  }
  EXPECT_LE(hi / lo, 1.01);
}

TEST_F(Cli, ReproduceIsRepeatable) {
  const std::string args = "--seed 4 reproduce example2 --trials 40 --outdir ";
  ASSERT_EQ(run(args + path("a")).code, 0);
  ASSERT_EQ(run(args + path("b")).code, 0);
  for (const char* f : {"observations.csv", "estimates.csv", "snapshots.csv", "mse.csv", "p_eigs.csv"}) {
    EXPECT_EQ(read_text(path(std::string("a/") + f)), read_text(path(std::string("b/") + f))) << f;
  }
}

TEST_F(Cli, ReproduceErrors) {
  EXPECT_EQ(run("reproduce example3 --outdir " + path("x")).code, 1);
  std::ofstream(path("file")) << "x";
  EXPECT_EQ(run("reproduce example2 --trials 2 --outdir " + path("file")).code, 2);
}

TEST_F(Cli, DoublePrecisionOption) {
  const auto o = run("--precision double analyze --config " + kEx2 +
                     " --horizon 5 --k-max 10 --out " + path("a.json"));
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(run("--precision half analyze --config " + kEx2 + " --horizon 5 --k-max 10 --out " +
                path("a.json")).code, 1);
}
