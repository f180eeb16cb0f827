#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "helpers.hpp"

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "excursion");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = excursion::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("excursion_test_" + name)).string();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help and usage errors") {
    CHECK(run({"--help"}).code == 0);
    CHECK(run({}).code == 1);
    CHECK(run({"bogus"}).code == 1);
    CHECK(run({"oracle", "--delta", "x"}).code == 1);
    CHECK(run({"oracle", "--dgp", "bogus"}).code == 1);
    CHECK(run({"oracle", "--theta", "0.2,0.3"}).code == 1);
    CHECK(run({"estimate", "--dgp", "csv"}).code == 1);
    CHECK(run({"sweep-theta", "--threads", "0"}).code == 1);
  }

  TEST_CASE("oracle output") {
    const Run r = run({"oracle", "--summary", "A1", "--theta", "0.3"});
    CHECK(r.code == 0);
    CHECK(r.out ==
          "# excursion oracle\n# dgp=two-step\n# theta=0.3\n# t=2\n# delta=1\n# summary=A1\n"
          "contrast,t,delta,summary_value,value\nblip-to-zero,2,1,A1=0,-1\nblip-to-zero,2,1,A1=1,1\n");
    const Run m = run({"oracle"});
    CHECK(m.out.find("blip-to-zero,2,1,none,0.43378083\n") != std::string::npos);
    const Run two = run({"oracle", "--delta", "2"});
    CHECK(two.out.find("continuous-vs-never,1,2,none,1\n") != std::string::npos);
    CHECK(run({"oracle", "--t", "2", "--delta", "2"}).code == 1);
  }

  TEST_CASE("numerical failures exit with 2") {
    const std::string path = temp_path("zero.dgp");
    {
      std::ofstream f(path);
      f << "horizon = 0\n[outcome 0]\nhistory = *; prob = 0\n[protocol 0]\nhistory = *; prob = 0.5\n";
    }
    const Run r = run({"oracle", "--dgp", "tabular", "--config", path});
    CHECK(r.code == 2);
    CHECK(r.err.find("error:") == 0);
    std::filesystem::remove(path);
  }

  TEST_CASE("sweeps") {
    const Run s = run({"sweep-theta", "--theta", "0,0.2689414213699951,1", "--n", "2000"});
    REQUIRE(s.code == 0);
    CHECK(s.out.rfind("# excursion sweep-theta\n", 0) == 0);
    CHECK(s.out.find("theta,beta_closed_form,beta_oracle,beta_hat,se\n0,-1,-1,nan,nan\n0.268941421,0,0,") != std::string::npos);
    CHECK(s.out.find("\n1,1,1,nan,nan\n") != std::string::npos);
    CHECK(s.out.find("# root_bracket=[0.268941421,0.268941421]") != std::string::npos);
    CHECK(run({"sweep-theta", "--theta", "0.2,1.5"}).code == 1);
    CHECK(run({"sweep-theta", "--theta", "0.2,,0.4"}).code == 1);

    const Run m = run({"sweep-modifier", "--theta", "0,1", "--x2", "0"});
    REQUIRE(m.code == 0);
    CHECK(m.out.find("theta,x2,beta,slope_at_zero\n0,0,-1.34692474,") != std::string::npos);
    CHECK(m.out.find("\n1,0,1.04658317,") != std::string::npos);
    CHECK(run({"sweep-modifier", "--x2", ""}).code == 1);
  }

  TEST_CASE("simulate then estimate from the csv") {
    const std::string data = temp_path("data.csv");
    const Run sim = run({"simulate", "--n", "4000", "--seed", "3", "--out", data});
    REQUIRE(sim.code == 0);
    CHECK(sim.out.empty());
    const std::string text = testing::slurp(data);
    CHECK(text.rfind("# excursion simulate\n# dgp=two-step\n# theta=0.5\n# n=4000\n# seed=3\nsubject,t,", 0) == 0);
    const Run est = run({"estimate", "--dgp", "csv", "--config", data, "--propensities", "estimated", "--t", "2"});
    REQUIRE(est.code == 0);
    const Run direct = run({"estimate", "--n", "4000", "--seed", "3", "--propensities", "estimated"});
    REQUIRE(direct.code == 0);
    const auto body = [](const std::string& s) { return s.substr(s.find("name,estimate,se")); };
    CHECK(body(est.out) == body(direct.out));
    std::filesystem::remove(data);
  }

  TEST_CASE("output does not depend on threads") {
    const Run a = run({"sweep-theta", "--theta", "0.2,0.5,0.8", "--n", "3000", "--threads", "1"});
    const Run b = run({"sweep-theta", "--theta", "0.2,0.5,0.8", "--n", "3000", "--threads", "4"});
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(run({"simulate", "--n", "500", "--threads", "4"}).out == run({"simulate", "--n", "500"}).out);
  }

  TEST_CASE("tabular estimate pools trials by default") {
    const Run r = run({"estimate", "--dgp", "tabular", "--config", testing::config_path("null.dgp"), "--n", "3000"});
    CHECK(r.code == 0);
    CHECK(r.out.find("# t=pooled\n") != std::string::npos);
    CHECK(run({"estimate", "--dgp", "tabular", "--config", testing::config_path("null.dgp"), "--theta", "0.5"}).code == 1);
  }

  TEST_CASE("check reports load errors and continues") {
    const Run r = run({"check", "variation-independence", "--config", testing::config_path("faulty.dgp")});
    CHECK(r.code == 1);
    CHECK(r.out.find(",ERROR,\"[outcome 1]: probability 1.2 outside [0,1]\"") != std::string::npos);
    CHECK(r.out.find("variation-independence,\"admissible-19\",PASS") != std::string::npos);
    CHECK(r.out.find("variation-independence,\"out-of-range-4\",PASS") != std::string::npos);
    const Run np = run({"check", "null-preservation"});
    CHECK(np.code == 0);
    CHECK(np.out.find("null-preservation,\"two-step(theta=0.5)\",XFAIL,") != std::string::npos);
    CHECK(run({"check", "everything"}).code == 1);
  }
}
