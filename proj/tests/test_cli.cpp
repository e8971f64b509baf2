#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "slowfast/cli.hpp"

using slowfast::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::filesystem::path temp_dir() {
  auto d = std::filesystem::temp_directory_path() / "slowfast_cli_test";
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("format_double keeps 17 digits") {
  CHECK(slowfast::cli::format_double(0.1) == "0.10000000000000001");
  CHECK(slowfast::cli::format_double(2.0) == "2");
}

TEST_CASE("derive prints the manifold and a certificate") {
  const auto r = call({"derive", "--model", "duffing", "--grade", "5"});
  REQUIRE(r.code == 0);
  const auto ls = lines(r.out);
  REQUIRE(ls.size() == 10);
  CHECK(ls[1] == "f = x - x^3");
  CHECK(ls[3] ==
        "h = x - x^3 - (x + l1 - 4x^3 - 3x^2*l1)*e + (2x + l1 - 20x^3 - "
        "18x^2*l1 - 6x*l1^2)*e^2 - (5x + 2l1)*e^3 + (14x + 5l1)*e^4");
  CHECK(ls[4] ==
        "k = l1 - (l1 - 3x^2*l1)*e + (2l1 - 6x^2*l1 + 6x*l1^2)*e^2 - "
        "5l1*e^3 + 14l1*e^4");
  CHECK(ls[7] == "residual[h] = 0");
  CHECK(ls[8] == "residual[k] = 0");

  const auto asym = call({"derive", "--model", "asymmetric", "--eps-order", "2"});
  CHECK(asym.code == 0);
  CHECK(asym.out.find("f = 2x + x^2 - x^3") != std::string::npos);

  const auto custom = call({"derive", "--model", "custom", "--f", "0,2,1,-1",
                            "--roots", "-1,0,2", "--grade", "3"});
  CHECK(custom.code == 0);
  CHECK(custom.out.find("f = 2x + x^2 - x^3") != std::string::npos);
}

TEST_CASE("usage and configuration errors exit with 2") {
  CHECK(call({}).code == 2);
  CHECK(call({"frobnicate"}).code == 2);
  const auto flag = call({"derive", "--bogus"});
  CHECK(flag.code == 2);
  CHECK(flag.err.find("--bogus") != std::string::npos);
  CHECK(call({"derive", "--model", "lorenz"}).code == 2);
  CHECK(call({"derive", "--model", "custom", "--f", "1,1", "--roots", "-1"})
            .code == 2);
  CHECK(call({"simulate", "--nu", "-1"}).code == 2);
  CHECK(call({"simulate", "--scheme", "rk4"}).code == 2);
  CHECK(call({"simulate", "--D", "0.1", "--invD", "10"}).code == 2);
  CHECK(call({"path", "--eps", "0.1,0.2"}).code == 2);
  CHECK(call({"scaling", "--reference", "--eps", "0.3"}).code == 2);
  CHECK(call({"scaling", "--action", "guess", "--reference"}).code == 2);
  CHECK(call({"derive", "--config", "/nonexistent/file.json"}).code == 2);
  CHECK(call({"derive", "--help"}).code == 0);
}

TEST_CASE("computation errors exit with 1") {
  // Reduced path does not reach the saddle at this e.
  const auto r = call({"path", "--eps", "0.25", "--route", "reduced"});
  CHECK(r.code == 1);
  CHECK(r.err.find("misses the saddle") != std::string::npos);
}

TEST_CASE("path CSV") {
  const auto r = call({"path", "--eps", "0"});
  REQUIRE(r.code == 0);
  const auto ls = lines(r.out);
  CHECK(ls.front() == "t,x,l1,y,l2");
  CHECK(ls.size() > 100);
  double prev = -2.0;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    double t, x, l1, y, l2;
    REQUIRE(std::sscanf(ls[i].c_str(), "%lf,%lf,%lf,%lf,%lf", &t, &x, &l1, &y,
                        &l2) == 5);
    CHECK(x > prev);
    prev = x;
    CHECK(std::abs(l1 + 2 * (x - x * x * x)) < 1e-6);
  }
  const auto full = call({"path", "--eps", "0.1"});
  CHECK(full.code == 0);
}

TEST_CASE("action CSV") {
  const auto r = call({"action", "--eps", "0,0.02", "--route", "reduced"});
  REQUIRE(r.code == 0);
  const auto ls = lines(r.out);
  REQUIRE(ls.size() == 3);
  CHECK(ls[0] == "epsilon,R,R_singular,eps2_fit,miss_distance,H_drift");
  CHECK(ls[1].rfind("0,0.5,0.5,", 0) == 0);
  double e, R, R0, c2, miss, h;
  REQUIRE(std::sscanf(ls[2].c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &e, &R, &R0,
                      &c2, &miss, &h) == 6);
  CHECK(R == doctest::Approx(0.5 - 0.25 * 0.0004).epsilon(1e-5));
  CHECK(c2 == doctest::Approx(-0.25).epsilon(0.08));
  CHECK(miss < 1e-3);
}

TEST_CASE("simulate is reproducible and independent of workers") {
  const std::vector<std::string> base{"simulate", "--model", "duffing",
                                      "--eps", "0.1", "--invD", "20",
                                      "--trials", "1", "--seed", "7"};
  const auto a = call(base);
  const auto b = call(base);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  const auto ls = lines(a.out);
  REQUIRE(ls.size() == 2);
  CHECK(ls[0] == "epsilon,D,n_trials,mean_T,std_T,timeout_count,seed,nu");

  std::vector<std::string> sweep{"simulate", "--eps", "0.1,0.3", "--D",
                                 "0.125", "--trials", "16", "--seed", "3"};
  std::string first;
  for (const char* w : {"1", "3"}) {
    auto args = sweep;
    args.push_back("--workers");
    args.push_back(w);
    const auto r = call(args);
    REQUIRE(r.code == 0);
    if (first.empty()) first = r.out;
    CHECK(r.out == first);
  }
  auto other = sweep;
  other[other.size() - 1] = "4";
  CHECK(call(other).out != first);
}

TEST_CASE("worker count from the environment") {
  setenv("SLOWFAST_WORKERS", "2", 1);
  CHECK(call({"simulate", "--invD", "8", "--trials", "4"}).code == 0);
  setenv("SLOWFAST_WORKERS", "many", 1);
  CHECK(call({"simulate", "--invD", "8", "--trials", "4"}).code == 2);
  // An explicit flag does not consult the environment.
  CHECK(call({"simulate", "--invD", "8", "--trials", "4", "--workers", "1"})
            .code == 0);
  unsetenv("SLOWFAST_WORKERS");
}

TEST_CASE("output files, raw times and config files") {
  const auto dir = temp_dir();
  const auto out = dir / "sim.csv";
  const auto raw = dir / "raw.csv";
  const auto r = call({"simulate", "--invD", "8", "--trials", "5", "--seed",
                       "11", "--output", out.string(), "--raw", raw.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  CHECK(lines(slurp(out)).size() == 2);
  const auto raw_lines = lines(slurp(raw));
  REQUIRE(raw_lines.size() == 6);
  CHECK(raw_lines[0] ==
        "epsilon,D,trial,first_passage_time,steps,max_newton_iterations,status");
  CHECK(raw_lines[1].find(",escaped") != std::string::npos);

  const auto cfg = dir / "run.json";
  {
    std::ofstream f(cfg);
    f << R"({"model": "duffing", "eps": [0.1], "invD": 8, "trials": 5,
             "seed": 11, "integrator": {"nu": 0.01, "scheme": "implicit"}})";
  }
  const auto from_file = call({"simulate", "--config", cfg.string()});
  REQUIRE(from_file.code == 0);
  CHECK(from_file.out == slurp(out));
  // Flags win over the file.
  const auto flagged =
      call({"simulate", "--config", cfg.string(), "--trials", "6"});
  CHECK(lines(flagged.out)[1].find(",6,") != std::string::npos);

  {
    std::ofstream f(cfg);
    f << R"({"model": "duffing", "colour": "blue"})";
  }
  const auto bad = call({"simulate", "--config", cfg.string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("colour") != std::string::npos);
  {
    std::ofstream f(cfg);
    f << "{ not json";
  }
  CHECK(call({"derive", "--config", cfg.string()}).code == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("table1 and reference scaling") {
  const auto t = call({"table1"});
  REQUIRE(t.code == 0);
  const auto ls = lines(t.out);
  REQUIRE(ls.size() == 11);
  for (std::size_t i = 4; i < ls.size(); ++i) {
    CHECK(ls[i].substr(ls[i].size() - 3) == "yes");
  }
  CHECK(ls[10].find("5.4287") != std::string::npos);

  const auto s = call({"scaling", "--reference", "--eps", "0.1,1.0",
                       "--action", "exact"});
  REQUIRE(s.code == 0);
  const auto sl = lines(s.out);
  REQUIRE(sl.size() == 3);
  CHECK(sl[0] ==
        "epsilon,cs_pred,cs_fit,cs_stderr,agree,status,z,beyond_manifold_bound");
  CHECK(sl[1].find(",true,agree,") != std::string::npos);
  CHECK(sl[2].find(",false,disagree,") != std::string::npos);
}
