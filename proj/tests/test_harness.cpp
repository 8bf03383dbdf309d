#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aif/env.hpp"
#include "aif/harness.hpp"
#include "oracles.hpp"

using namespace aif;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an aif::Error");
  return Errc::InvalidArgument;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("aif_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig elephant_cfg(json overrides = json::object()) {
  overrides["scenario"] = "elephant";
  return ExperimentConfig::from_json(overrides);
}

double l1(const Categorical& a, const Categorical& b) { return oracle::l1(a.vec(), b.vec()); }

}  // namespace

TEST_CASE("config parsing and validation") {
  const auto t = ExperimentConfig::from_json(json{{"scenario", "tmaze"}});
  CHECK(t.agents == 1);
  CHECK(t.depth == 2);
  CHECK(t.gamma == 16.0);
  const auto e = ExperimentConfig::defaults_for("elephant");
  CHECK(e.agents == 3);
  CHECK(e.steps == 5);
  CHECK(e.depth == 0);
  CHECK(e.effective_k() == 2);
  CHECK(e.effective_placements() == std::vector<std::size_t>{0, 1, 2});
  CHECK(e.noise == 0.1);

  CHECK(elephant_cfg({{"true_what", "statue"}}).true_what == 1);
  CHECK(elephant_cfg({{"true_what", 2}}).true_what == 2);

  CHECK(code_of([] { ExperimentConfig::from_json(json{{"scenario", "tmaze"}, {"colour", 1}}); }) == Errc::ConfigInvalid);
  CHECK(code_of([] { ExperimentConfig::from_json(json{{"scenario", "maze"}}); }) == Errc::ConfigInvalid);
  CHECK(code_of([] { ExperimentConfig::from_json(json{{"scenario", "tmaze"}, {"gamma", 0}}); }) == Errc::ConfigInvalid);
  CHECK(code_of([] { ExperimentConfig::from_json(json{{"scenario", "tmaze"}, {"steps", "two"}}); }) == Errc::ConfigInvalid);
  CHECK(code_of([] { elephant_cfg({{"transport", "udp"}}); }) == Errc::ConfigInvalid);
  CHECK(code_of([] { elephant_cfg({{"k", 3}}); }) == Errc::ConfigInvalid);
  CHECK(code_of([] { elephant_cfg({{"placements", {0, 1}}}); }) == Errc::ConfigInvalid);
  CHECK(code_of([] { elephant_cfg({{"true_what", "giraffe"}}); }) == Errc::ConfigInvalid);
  CHECK(code_of([] { elephant_cfg({{"agents", 1}}); }) == Errc::ConfigInvalid);
  CHECK(code_of([] { ExperimentConfig::load("/nonexistent/cfg.json"); }) == Errc::ConfigInvalid);

  // The resolved config reads back to itself.
  const auto cfg = elephant_cfg({{"k", 1}, {"seed", 9}});
  CHECK(ExperimentConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());
}

TEST_CASE("synchrony examples") {
  const Categorical a{0.2, 0.8}, b{0.6, 0.4};
  CHECK(synchrony(a, a) == 0.0);
  CHECK(synchrony(Categorical{1, 0}, Categorical{0, 1}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(synchrony(a, b) == synchrony(b, a));
  CHECK(synchrony(a, b) > 0.0);
  CHECK(code_of([&] { synchrony(a, Categorical{0.2, 0.3, 0.5}); }) == Errc::DimMismatch);
  const std::vector<Categorical> three{a, a, a};
  CHECK(mean_pairwise_synchrony(three) == 0.0);
}

TEST_CASE("tmaze: depth-2 agent visits the cue, then the signalled arm") {
  auto cfg = ExperimentConfig::from_json(json{{"scenario", "tmaze"}, {"seed", 1}});
  const auto run = run_experiment(cfg);
  const auto moves = run.summary["moves"].get<std::vector<std::size_t>>();
  REQUIRE(moves.size() == 2);
  CHECK(moves[0] == tmaze::kCue);
  const std::size_t correct = run.true_state[1] == tmaze::kContextLeft ? tmaze::kLeft : tmaze::kRight;
  CHECK(moves[1] == correct);
  CHECK(run.summary["cue_before_arm"] == true);
  CHECK(run.summary["correct_arm"] == true);
  REQUIRE(run.agents.size() == 1);
  CHECK(run.agents[0].steps.size() == 2);
}

TEST_CASE("tmaze: vanishing precision leaves the policy prior") {
  auto cfg = ExperimentConfig::from_json(json{{"scenario", "tmaze"}, {"gamma", 1e-12}, {"depth", 0}});
  const auto run = run_experiment(cfg);
  for (const auto& s : run.agents[0].steps) {
    REQUIRE(!s.policy_probs.empty());
    const double e = 1.0 / double(s.policy_probs.size());
    for (double p : s.policy_probs) CHECK(std::abs(p - e) <= 1e-9);
  }
}

TEST_CASE("tmaze: logs are byte-identical across reruns") {
  auto cfg = ExperimentConfig::from_json(json{{"scenario", "tmaze"}, {"seed", 4}, {"steps", 3}});
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  write_logs(run_experiment(cfg), a);
  write_logs(run_experiment(cfg), b);
  CHECK(slurp(a / "agent0.csv") == slurp(b / "agent0.csv"));
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
  const auto csv = slurp(a / "agent0.csv");
  CHECK(csv.rfind("t,factor,belief,F,G,risk,ambiguity,info_gain,pragmatic,action,obs\n", 0) == 0);
  CHECK(csv.find("\n0,pi0,") != std::string::npos);
  CHECK(csv.find("\n2,u0,") != std::string::npos);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("elephant: noise-free sharing reaches the pooled posterior in one round") {
  const auto cfg = elephant_cfg({{"noise", 0.0}, {"steps", 1}});
  const auto run = run_experiment(cfg);
  std::vector<Observation> history;
  Observation all;
  for (const auto& a : run.agents) {
    all.push_back(a.steps[0].obs[0]);
    all.push_back(a.steps[0].obs[1]);
  }
  history.push_back(all);
  const auto pooled = pooled_what_posterior(cfg, history);
  for (const auto& a : run.agents) CHECK(l1(a.steps[0].beliefs[0], pooled) <= 1e-6);
  CHECK(pooled[elephant::kElephant] == 1.0);
}

TEST_CASE("elephant: without sharing some agent stays away from the pooled posterior") {
  const auto run = run_experiment(elephant_cfg({{"share", false}}));
  CHECK(run.summary["max_l1_to_pooled"].get<double>() > 0.1);
  for (const auto& a : run.agents) CHECK(a.steps.back().sources.empty());
}

TEST_CASE("elephant: agents with identical views are synchronised") {
  const auto run = run_experiment(elephant_cfg({{"agents", 2}, {"placements", {0, 0}}, {"share", false}, {"noise", 0.0}}));
  for (double s : run.synchrony) CHECK(s == 0.0);
}

TEST_CASE("elephant: partial fusion with k = 1") {
  const auto run = run_experiment(elephant_cfg({{"k", 1}, {"steps", 3}}));
  for (const auto& a : run.agents) CHECK(a.steps.back().sources.size() == 1);
  for (double s : run.synchrony) CHECK((s >= 0.0 && s <= std::log(2.0)));
}

TEST_CASE("elephant: logs and transport equivalence") {
  auto mem = elephant_cfg({{"seed", 7}});
  auto sock = elephant_cfg({{"seed", 7}, {"transport", "socket"}});
  const auto dm = scratch("mem"), ds = scratch("sock");
  const auto rm = run_experiment(mem);
  write_logs(rm, dm);
  write_logs(run_experiment(sock), ds);
  for (const char* f : {"agent0.csv", "agent1.csv", "agent2.csv"}) {
    REQUIRE(fs::exists(dm / f));
    CHECK(slurp(dm / f) == slurp(ds / f));
  }
  const auto doc = json::parse(slurp(dm / "manifest.json"));
  CHECK(doc["version"] == kVersion);
  CHECK(doc["files"].size() == 3);
  CHECK(doc["summary"]["final_mean_synchrony"].get<double>() == rm.synchrony.back());
  CHECK(slurp(dm / "agent0.csv").find(",sources,") != std::string::npos);
  fs::remove_all(dm);
  fs::remove_all(ds);

  CHECK(code_of([&] { write_logs(rm, "/proc/aif-cannot-write"); }) == Errc::IoError);
}

TEST_CASE("cli exit codes") {
  const std::string cli = AIF_CLI_PATH;
  const auto out = scratch("cli");
  const auto run = [&](const std::string& args) {
    const int rc = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  };
  CHECK(run("run tmaze --out " + out.string()) == 0);
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(run("run elephant --transport socket --steps 2 --out " + out.string()) == 0);
  CHECK(run("run giraffe") == 2);
  CHECK(run("run tmaze --bogus") == 2);
  CHECK(run("run tmaze --gamma -1 --out " + out.string()) == 2);
  CHECK(run("run tmaze --config /nonexistent.json") == 2);

  const auto cfg = out / "tiny.json";
  std::ofstream(cfg) << R"({"node_budget": 1})";
  CHECK(run("run tmaze --config " + cfg.string() + " --out " + out.string()) == 1);
  fs::remove_all(out);
}
