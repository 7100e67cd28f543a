#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <limits>

#include "nlb/bundle_io.hpp"
#include "nlb/error.hpp"
#include "nlb/rng.hpp"
#include "oracles.hpp"

using namespace nlb;

namespace {

void expect_same_membership(const Region& a, const Region& b, const BoxRegion& bounds, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int i = 0; i < 3000; ++i) {
    const Vec x = uniform_in_box(rng, bounds.lower, bounds.upper);
    REQUIRE(a.contains(x) == b.contains(x));
  }
}

}  // namespace

TEST_CASE("numbers and boxes keep infinities") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(number_to_json(inf) == "inf");
  CHECK(number_from_json("-inf") == -inf);
  CHECK(number_from_json(2.5) == 2.5);
  CHECK_THROWS_AS(number_from_json("huge"), ParseError);
  CHECK_THROWS_AS(number_to_json(std::nan("")), Error);
  Vec lo(2), hi(2);
  lo << -1, -inf;
  hi << 1, inf;
  const BoxRegion b(lo, hi);
  const BoxRegion back = box_from_json(to_json(b));
  CHECK(back.lower == b.lower);
  CHECK(back.upper == b.upper);
  CHECK_THROWS_AS(box_from_json(nlohmann::json{{"lower", {0.0}}, {"upper", {1.0, 2.0}}}), ParseError);
}

TEST_CASE("region and task round trips") {
  for (double a : {1.0, 3.0}) {
    const RwaTask t = make_docking_task(a);
    const RwaTask back = task_from_json(to_json(t));
    CHECK(back.name == t.name);
    CHECK(back.initial.same_as(t.initial));
    CHECK(back.goal.same_as(t.goal));
    CHECK(back.unsafe.same_as(t.unsafe));
    CHECK(to_json(back) == to_json(t));
    expect_same_membership(back.unsafe, t.unsafe, t.domain, 5);
  }
  CHECK_THROWS_AS(region_from_json(nlohmann::json{{"kind", "blob"}}), ParseError);
}

TEST_CASE("certificate references resolve by name") {
  auto net = std::make_shared<const Mlp>(oracle::random_net({2, 6, 1}, 12));
  const Region r = Region::union_of({Region::box(BoxRegion(Vec::Constant(2, -0.1), Vec::Constant(2, 0.1))),
                                     Region::cert_sublevel(net, 0.2, "W")});
  const nlohmann::json j = to_json(r);
  CHECK_THROWS_AS(region_from_json(j), ParseError);
  const Region dangling = region_from_json(j, {}, true);
  CHECK_THROWS_AS(dangling.contains(Vec::Constant(2, 0.5)), Error);
  const Region back = region_from_json(j, {{"W", net}});
  CHECK(back.same_as(r));
  expect_same_membership(back, r, BoxRegion(Vec::Constant(2, -2), Vec::Constant(2, 2)), 6);
  CHECK_THROWS_AS(to_json(Region::cert_sublevel(net, 0.0)), Error);
}

TEST_CASE("certificate bundle round trip") {
  const SystemParams params;
  const Plant plant = spacecraft_plant(params);
  const RwaTask task = make_docking_task(2.0);
  const Mlp cert = oracle::random_net({4, 10, 1}, 1);
  const Mlp ctrl = oracle::random_net({4, 10, 2}, 2);
  const CertificateBundle b = make_bundle(plant, params, task, cert, ctrl, Witness{}, -10.0, 1.2, true);
  const std::string path = oracle::tmp_path("bundle_rt.json");
  save_bundle(b, path);
  const CertificateBundle back = load_bundle(path);
  CHECK(back.plant == "spacecraft");
  CHECK(back.filtered);
  CHECK(*back.certificate.net == cert);
  CHECK(*back.controller == ctrl);
  CHECK(back.certificate.witness.beta == b.certificate.witness.beta);
  CHECK(back.certificate.c1 == -10.0);
  CHECK(back.certificate.c2 == 1.2);
  CHECK(back.task.goal.same_as(task.goal));
  CHECK(back.params.mean_motion == params.mean_motion);
  CHECK(to_json(back) == to_json(b));
}

TEST_CASE("bundle load failures") {
  CHECK_THROWS_AS(load_bundle(oracle::tmp_path("does_not_exist.json")), Error);
  const std::string bad = oracle::tmp_path("bad_bundle.json");
  {
    std::ofstream(bad) << "{\"format\": \"nlb-bundle\", ";
  }
  CHECK_THROWS_AS(load_bundle(bad), ParseError);
  {
    std::ofstream(bad) << "{\"format\": \"something-else\"}";
  }
  CHECK_THROWS_AS(load_bundle(bad), ParseError);
}

TEST_CASE("chain bundles bind stage goals to the previous certificate") {
  const SystemParams params;
  const Plant plant = double_integrator_plant(params);
  const RwaTask task = make_surrogate_task(2.0);
  const auto sched = docking_schedule(plant, {1.0, 2.0});
  ChainBundle c;
  c.plant = plant.name;
  c.params = params;
  c.task = task;
  c.stage_names = {sched[0].name, sched[1].name};
  for (std::size_t i = 0; i < sched.size(); ++i) {
    Stage s;
    s.index = static_cast<int>(i);
    s.controller = std::make_shared<const Mlp>(oracle::random_net({2, 5, 1}, 20 + i));
    s.initial = sched[i].initial;
    s.unsafe = sched[i].unsafe;
    s.domain = sched[i].domain;
    s.goal = i ? build_stage_goal(c.chain.stages.back(), task.goal) : task.goal;
    s.certificate.net = std::make_shared<const Mlp>(oracle::random_net({2, 5, 1}, 40 + i));
    s.certificate.goal = s.goal;
    s.certificate.unsafe = s.unsafe;
    s.verified = true;
    s.iterations = 3;
    c.chain.stages.push_back(s);
  }
  const std::string path = oracle::tmp_path("chain_rt.json");
  save_chain(c, path);
  CHECK(std::filesystem::exists(oracle::tmp_path("chain_rt.stage1.json")));
  const ChainBundle back = load_chain(path);
  REQUIRE(back.chain.size() == 2);
  CHECK(back.stage_names == c.stage_names);
  CHECK(*back.chain.stages[1].certificate.net == *c.chain.stages[1].certificate.net);
  CHECK(back.chain.stages[1].iterations == 3);
  // The loaded stage-1 goal refers to the loaded stage-0 certificate object.
  const Region& g = back.chain.stages[1].goal;
  const Region rebuilt = build_stage_goal(back.chain.stages[0], back.task.goal);
  CHECK(g.same_as(rebuilt));
  expect_same_membership(g, c.chain.stages[1].goal, task.domain, 8);
}
