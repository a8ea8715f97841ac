#include <doctest.h>

#include <sstream>

#include "dfl/config.hpp"
#include "dfl/error.hpp"
#include "dfl/report.hpp"

using namespace dfl;

TEST_SUITE("config") {

TEST_CASE("defaults follow the reference setup") {
  const ExperimentConfig e = experiment_from_json(json::object());
  CHECK(e.run.m == 100);
  CHECK(e.run.hyper.eta == 0.1);
  CHECK(e.run.hyper.lr_decay == 0.998);
  CHECK(e.run.hyper.beta == 0.99);
  CHECK(e.run.hyper.K == 5);
  CHECK(e.run.topology.kind == TopologyKind::kRandomDynamic);
  CHECK(e.run.topology.n_neighbors == 10);
  CHECK(e.run.init == InitKind::kZeros);
}

TEST_CASE("unknown keys and wrong types are rejected") {
  CHECK_THROWS_AS(experiment_from_json(json{{"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(experiment_from_json(json{{"hyper", {{"betta", 0.5}}}}), ConfigError);
  CHECK_THROWS_AS(experiment_from_json(json{{"m", "ten"}}), ConfigError);
  CHECK_THROWS_AS(experiment_from_json(json{{"m", -3}}), ConfigError);
  CHECK_THROWS_AS(experiment_from_json(json{{"hyper", {{"K", 2.5}}}}), ConfigError);
  CHECK_THROWS_AS(experiment_from_json(json{{"algorithm", "fedavg"}}), ConfigError);
  CHECK_THROWS_AS(experiment_from_json(json{{"hyper", {{"beta", 1.0}}}}), ConfigError);
}

TEST_CASE("integers are accepted for float keys") {
  CHECK(experiment_from_json(json{{"hyper", {{"beta", 0}}}}).run.hyper.beta == 0.0);
}

TEST_CASE("overrides") {
  json doc = json::object();
  apply_override(doc, "hyper.beta=0.9");
  apply_override(doc, "topology.kind=ring");
  apply_override(doc, "m=16");
  const ExperimentConfig e = experiment_from_json(doc);
  CHECK(e.run.hyper.beta == 0.9);
  CHECK(e.run.topology.kind == TopologyKind::kRing);
  CHECK(e.run.topology.m == 16);
  CHECK_THROWS_AS(apply_override(doc, "hyper.gamma=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "hyper"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "hyper=3"), ConfigError);
}

TEST_CASE("json round trip") {
  json doc{{"m", 12}, {"seed", 7}, {"hyper", {{"lambda", 0.3}}}, {"topology", {{"kind", "grid"}}}};
  const ExperimentConfig a = experiment_from_json(doc);
  const ExperimentConfig b = experiment_from_json(to_json(a));
  CHECK(to_json(a) == to_json(b));
}

TEST_CASE("records csv round trip") {
  std::vector<RoundRecord> recs(2);
  recs[0].round = 1;
  recs[0].train_loss = 0.1 + 0.2;
  recs[0].grad_norm_z_sq = 1e-300;
  recs[0].test_accuracy = 2.0 / 3.0;
  recs[1].round = 2;
  recs[1].consensus = 123456.789;
  std::stringstream ss;
  write_records_csv(ss, recs);
  const std::string text = ss.str();
  CHECK(text.rfind("round,train_loss,grad_norm_z_sq,consensus,test_accuracy,psi_round,elapsed_ms\n", 0) == 0);
  CHECK(text.find(",,") != std::string::npos);
  const auto back = read_records_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(same_metrics(back[0], recs[0]));
  CHECK(same_metrics(back[1], recs[1]));
  CHECK_FALSE(back[1].test_accuracy.has_value());
  std::stringstream bad("round,oops\n");
  CHECK_THROWS_AS(read_records_csv(bad), DataError);
}

TEST_CASE("summary carries the resolved config") {
  ExperimentConfig e;
  e.run.seed = 5;
  RunResult r;
  const json s = make_summary(e, r);
  CHECK(s["format"] == "dfl-summary-v1");
  CHECK(s["config"]["topology"]["seed"].get<std::uint64_t>() == e.run.resolved_topology().seed);
  CHECK(experiment_from_json(s["config"]).run.resolved_topology().seed == e.run.resolved_topology().seed);
}

}
