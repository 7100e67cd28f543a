#include "nlb/composition.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <sstream>
#include <thread>

#include "nlb/conditions.hpp"
#include "nlb/error.hpp"
#include "nlb/rng.hpp"

namespace nlb {

RwaTask CrwaCertificate::stage_task(std::size_t i) const {
  const Stage& s = stages.at(i);
  return {"stage " + std::to_string(i), s.initial, s.goal, s.unsafe, s.domain};
}

Region build_stage_goal(const Stage& prev, const Region& base_goal) {
  if (!prev.certificate.net) throw PreconditionError("build_stage_goal: previous stage has no certificate");
  const Region sub = Region::cert_sublevel(prev.certificate.net, prev.certificate.witness.beta,
                                           "V" + std::to_string(prev.index));
  return Region::union_of({base_goal, Region::intersection_of({Region::complement(prev.unsafe), sub})})
      .with_label("X_G^" + std::to_string(prev.index + 1));
}

// ---------------------------------------------------------------- validation

bool ChainReport::passed() const {
  return std::all_of(items.begin(), items.end(), [](const ChainItem& c) { return c.passed; });
}

std::vector<ChainItem> ChainReport::failures() const {
  std::vector<ChainItem> out;
  std::copy_if(items.begin(), items.end(), std::back_inserter(out), [](const ChainItem& c) { return !c.passed; });
  return out;
}

std::string ChainReport::summary() const {
  std::ostringstream os;
  for (const auto& c : items) {
    os << (c.passed ? "ok   " : "FAIL ") << "(" << c.condition << ") stage " << c.stage << ": " << c.check;
    if (!c.detail.empty()) os << " [" << c.detail << "]";
    os << '\n';
  }
  return os.str();
}

namespace {

std::string verdict_detail(const Verdict& v) {
  if (v.verified()) return {};
  std::ostringstream os;
  os << to_string(v.kind);
  if (v.has_counterexample()) os << " at " << v.counterexample.transpose();
  if (!v.reason.empty()) os << ": " << v.reason;
  return os.str();
}

class ChainChecker {
 public:
  ChainChecker(ChainReport& report, const BoxRegion& universe, const ChainCheckOptions& opt)
      : report_(report), universe_(universe), opt_(opt) {}

  void subset(const std::string& cond, int stage, const std::string& what, const Region& inner,
              const Region& outer) {
    if (inner.same_as(outer)) {
      add(cond, stage, what, true, "identical");
      return;
    }
    const Verdict v = check_containment(inner, outer, universe_, opt_.verifier);
    add(cond, stage, what, v.verified(), verdict_detail(v));
  }

  void equal(const std::string& cond, int stage, const std::string& what, const Region& a, const Region& b) {
    if (a.same_as(b)) {
      add(cond, stage, what, true, "identical");
      return;
    }
    const Verdict v1 = check_containment(a, b, universe_, opt_.verifier);
    const Verdict v2 = check_containment(b, a, universe_, opt_.verifier);
    std::string detail = verdict_detail(v1.verified() ? v2 : v1);
    add(cond, stage, what, v1.verified() && v2.verified(), detail);
  }

  void empty(const std::string& cond, int stage, const std::string& what, const Region& r) {
    const Verdict v = find_members(r, universe_, opt_.verifier);
    add(cond, stage, what, v.verified(), verdict_detail(v));
  }

  /// True when r provably has a point (a concrete witness was found).
  bool nonempty(const Region& r) { return find_members(r, universe_, opt_.verifier).has_counterexample(); }

  void add(const std::string& cond, int stage, const std::string& what, bool ok, std::string detail) {
    report_.items.push_back({cond, stage, what, ok, std::move(detail)});
  }

 private:
  ChainReport& report_;
  BoxRegion universe_;
  const ChainCheckOptions& opt_;
};

}  // namespace

ChainReport validate_chain(const CrwaCertificate& chain, const RwaTask& task, const ChainCheckOptions& options) {
  ChainReport rep;
  ChainChecker ck(rep, task.domain, options);
  if (chain.stages.empty()) {
    ck.add("i", 0, "chain has at least one stage", false, "empty chain");
    return rep;
  }
  const Stage& s0 = chain.stages.front();
  ck.equal("i", 0, "X_G^0 = X_G", s0.goal, task.goal);
  ck.subset("i", 0, "X_I^0 in X_I", s0.initial, task.initial);
  ck.subset("i", 0, "X_U in X_U^0", task.unsafe, s0.unsafe);
  ck.empty("i", 0, "X_U^0 disjoint from X_I^0 u X_G^0",
           Region::intersection_of({s0.unsafe, Region::union_of({s0.initial, s0.goal})}));

  for (std::size_t i = 1; i < chain.size(); ++i) {
    const Stage& prev = chain.stages[i - 1];
    const Stage& cur = chain.stages[i];
    const int si = static_cast<int>(i);
    ck.subset("ii", si, "X_I^{i-1} in X_I^i", prev.initial, cur.initial);
    ck.subset("ii", si, "X_I^i in X_I", cur.initial, task.initial);
    ck.subset("ii", si, "X_U in X_U^i", task.unsafe, cur.unsafe);
    ck.subset("ii", si, "X_U^i in X_U^{i-1}", cur.unsafe, prev.unsafe);

    const Region expected = build_stage_goal(prev, s0.goal);
    ck.add("ii", si, "goal built from the previous certificate", cur.goal.same_as(expected),
           cur.goal.same_as(expected) ? "" : "goal is not X_G^0 u (not X_U^{i-1} and V_{i-1} <= beta_{i-1})");

    // Sampling audit: earlier initial states must already count as goal states.
    std::size_t misses = 0;
    Vec first_miss;
    try {
      const auto pts = sample_region(prev.initial, task.domain, options.audit_samples,
                                     mix_seed(options.seed, i));
      for (const auto& p : pts) {
        if (!cur.goal.contains(p)) {
          if (misses++ == 0) first_miss = p;
        }
      }
    } catch (const SamplingError& e) {
      ck.add("ii", si, "X_I^{i-1} sampled into X_G^i", false, e.what());
      continue;
    }
    std::ostringstream os;
    if (misses > 0) os << misses << " of " << options.audit_samples << " samples outside, first " << first_miss.transpose();
    ck.add("ii", si, "X_I^{i-1} sampled into X_G^i", misses == 0, os.str());

    const bool grows = ck.nonempty(Region::intersection_of({cur.initial, Region::complement(prev.initial)}));
    const bool shrinks = !grows && ck.nonempty(Region::intersection_of({prev.unsafe, Region::complement(cur.unsafe)}));
    ck.add("iii", si, "X_I grows or X_U shrinks", grows || shrinks,
           grows ? "X_I grows" : (shrinks ? "X_U shrinks" : "neither set changes"));
  }

  const Stage& last = chain.final_stage();
  const int sl = static_cast<int>(chain.size() - 1);
  ck.equal("iv", sl, "X_I^{n-1} = X_I", last.initial, task.initial);
  ck.equal("iv", sl, "X_U^{n-1} = X_U", last.unsafe, task.unsafe);
  return rep;
}

// ---------------------------------------------------------------- training

std::vector<ScheduleEntry> docking_schedule(const Plant& plant, const std::vector<double>& half_widths,
                                            const DockingTaskOptions& options) {
  std::vector<ScheduleEntry> out;
  for (double a : half_widths) {
    const RwaTask t = make_task_for(plant, a, options);
    char name[64];
    std::snprintf(name, sizeof name, "[%g,%g]", -a, a);
    out.push_back({name, t.initial, t.unsafe, t.domain});
  }
  return out;
}

CrwaResult train_crwa(const Plant& plant, const std::vector<ScheduleEntry>& schedule, const RwaTask& task,
                      const CrwaOptions& options) {
  if (schedule.empty()) throw PreconditionError("train_crwa: empty schedule");
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - start).count(); };

  CrwaResult res;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const ScheduleEntry& e = schedule[i];
    res.stage_names.push_back(e.name);
    const Region goal = i == 0 ? task.goal : build_stage_goal(res.chain.stages.back(), task.goal);
    const RwaTask st{e.name, e.initial, goal, e.unsafe, e.domain};

    CegisOptions o = options.cegis;
    o.train.seed = mix_seed(options.cegis.train.seed, i);
    if (options.total_budget_s > 0) {
      o.wall_budget_s = std::min(o.wall_budget_s, options.total_budget_s - elapsed());
    }
    if (i > 0) o.initial_controller = *res.chain.stages.back().controller;
    const auto stage_start = clock::now();
    if (!o.initial_data) {
      Dataset data = base_dataset(st, o.train, mix_seed(o.train.seed, 23));
      if (i > 0 && options.annulus_samples > 0) {
        BnbConfig vc = with_plant_widths(o.verifier, plant);
        vc.time_budget_s = std::max(1.0, 0.05 * o.wall_budget_s);
        for (auto& p : sample_annulus(e.initial, goal, e.domain, options.annulus_samples, vc,
                                      mix_seed(o.train.seed, 24), o.train.neighbor_radius)) {
          if (legal_training_point(st, p)) data.add(std::move(p), Provenance::Sampled);
        }
      }
      o.initial_data = std::move(data);
    }
    if (o.wall_budget_s <= 0) {
      res.stage_seconds.push_back(0.0);
      res.stage_iterations.push_back(0);
      res.failed_stage = static_cast<int>(i);
      res.failure = "no time left for stage " + std::to_string(i);
      return res;
    }
    o.wall_budget_s -= std::chrono::duration<double>(clock::now() - stage_start).count();
    CegisResult r = cegis(plant, st, o);
    const double secs = std::chrono::duration<double>(clock::now() - stage_start).count();
    res.stage_seconds.push_back(secs);
    res.stage_iterations.push_back(r.iterations);
    if (r.status != CegisResult::Status::Verified) {
      res.failed_stage = static_cast<int>(i);
      res.failure = "stage " + std::to_string(i) + " " + e.name + ": " + r.note;
      return res;
    }
    Stage s;
    s.index = static_cast<int>(i);
    s.controller = std::make_shared<const Mlp>(std::move(r.controller));
    s.certificate = std::move(r.certificate);
    s.initial = e.initial;
    s.unsafe = e.unsafe;
    s.goal = goal;
    s.domain = e.domain;
    s.verified = true;
    s.seconds = secs;
    s.iterations = r.iterations;
    res.chain.stages.push_back(std::move(s));
  }
  res.complete = true;
  return res;
}

// ---------------------------------------------------------------- runtime

MetaState meta_start(const CrwaCertificate& chain, const Vec& state) {
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (chain.stages[i].initial.contains(state)) return {static_cast<int>(i), state};
  }
  throw PreconditionError("meta-controller: state is in no stage's initial set");
}

std::pair<Vec, MetaState> meta_control_step(const CrwaCertificate& chain, const Plant& plant, const MetaState& ms) {
  if (ms.current_stage < 0 || ms.current_stage >= static_cast<int>(chain.size())) {
    throw PreconditionError("meta-controller: stage index out of range");
  }
  MetaState next = ms;
  // Greedy: keep dropping while the state already sits in the current stage goal.
  while (next.current_stage > 0 && chain.stages[next.current_stage].goal.contains(next.state)) {
    --next.current_stage;
  }
  const Vec u = clip_thrust(chain.stages[next.current_stage].controller->forward(next.state), plant.thrust_limit);
  return {u, next};
}

Trajectory simulate_meta(const CrwaCertificate& chain, const Plant& plant, const Vec& s0, const RwaTask& task,
                         int max_steps) {
  if (max_steps < 1) throw PreconditionError("simulate_meta: max_steps must be >= 1");
  if (chain.stages.empty()) throw PreconditionError("simulate_meta: empty chain");
  Trajectory t;
  t.states.push_back(s0);
  if (task.goal.contains(s0)) {
    t.outcome = Outcome::Docked;
    t.stages.push_back(0);
    return t;
  }
  MetaState ms = meta_start(chain, s0);
  for (int k = 0;; ++k) {
    const Vec& s = t.states.back();
    if (k > 0 && task.goal.contains(s)) {
      t.outcome = Outcome::Docked;
      break;
    }
    if (task.unsafe.contains(s)) {
      t.outcome = Outcome::Unsafe;
      break;
    }
    if (k == max_steps) {
      t.outcome = Outcome::Truncated;
      break;
    }
    ms.state = s;
    auto [u, next] = meta_control_step(chain, plant, ms);
    ms = next;
    t.stages.push_back(ms.current_stage);
    t.inputs.push_back(u);
    t.states.push_back(plant.step.apply(s, u));
  }
  t.stages.push_back(ms.current_stage);
  return t;
}

BatchStats simulate_meta_batch(const CrwaCertificate& chain, const Plant& plant, const RwaTask& task, int trials,
                               int max_steps, std::uint64_t seed, int workers) {
  if (trials < 1) throw PreconditionError("simulate_meta_batch: trials must be >= 1");
  std::vector<Trajectory> runs(static_cast<std::size_t>(trials));
  auto run = [&](int i) {
    runs[i] = simulate_meta(chain, plant, batch_start_state(task, seed, i), task, max_steps);
    runs[i].states.resize(1);
    runs[i].stages.clear();
  };
  if (workers <= 1) {
    for (int i = 0; i < trials; ++i) run(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int i = next++; i < trials; i = next++) run(i);
      });
    }
  }
  return summarize(runs);
}

std::vector<Vec> sample_annulus(const Region& stage_initial, const Region& stage_goal, const BoxRegion& bounds,
                                std::size_t count, const BnbConfig& cfg, std::uint64_t seed,
                                double neighbor_radius) {
  const Region annulus =
      Region::intersection_of({stage_initial, Region::complement(stage_goal)}).with_label("X_I^i \\ X_G^i");
  if (count == 0) return {};
  std::vector<Vec> out;
  try {
    out = sample_region(annulus, bounds, count, seed, 1000);
  } catch (const SamplingError&) {
    // Rejection stalled: ask the verifier for members and sample around them.
    BnbConfig c = cfg;
    c.max_counterexamples = std::max<std::size_t>(1, std::min<std::size_t>(count, 64));
    const Verdict v = find_members(annulus, bounds, c);
    if (!v.has_counterexample()) return {};
    Rng rng(mix_seed(seed, 77));
    for (const auto& w : v.counterexamples) out.push_back(w);
    const std::size_t per = count / v.counterexamples.size() + 1;
    for (const auto& w : v.counterexamples) {
      const Vec lo = (w.array() - neighbor_radius).matrix().cwiseMax(bounds.lower);
      const Vec hi = (w.array() + neighbor_radius).matrix().cwiseMin(bounds.upper);
      for (std::size_t k = 0; k < per && out.size() < count; ++k) out.push_back(uniform_in_box(rng, lo, hi));
    }
  }
  std::erase_if(out, [&](const Vec& p) { return !stage_initial.contains(p) || stage_goal.contains(p); });
  return out;
}

// ---------------------------------------------------------------- reporting

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

}  // namespace

std::string stage_table_csv(const std::vector<CrwaResult>& runs) {
  std::ostringstream os;
  os.precision(10);
  os << "x_i,n,prior_x_i,cumulative_time_s,min_t,mean_t,max_t,min_i,mean_i,max_i,success_pct\n";
  std::size_t stages = 0;
  for (const auto& r : runs) stages = std::max(stages, r.stage_seconds.size());
  for (std::size_t k = 0; k < stages; ++k) {
    std::vector<double> t, prior;
    std::vector<int> it;
    int ok = 0;
    std::string name, prior_names;
    for (const auto& r : runs) {
      if (k >= r.stage_seconds.size()) continue;
      name = r.stage_names[k];
      prior_names.clear();
      double p = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        prior_names += (j ? "; " : "") + r.stage_names[j];
        p += r.stage_seconds[j];
      }
      prior.push_back(p);
      t.push_back(r.stage_seconds[k]);
      it.push_back(r.stage_iterations[k]);
      if (k < r.chain.size()) ++ok;
    }
    if (t.empty()) continue;
    auto mean = [](const auto& v) {
      double s = 0.0;
      for (auto x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    os << csv_field(name) << ',' << k + 1 << ',' << csv_field(k == 0 ? "N/A" : prior_names) << ','
       << mean(prior) << ',' << *std::min_element(t.begin(), t.end()) << ',' << mean(t) << ','
       << *std::max_element(t.begin(), t.end()) << ',' << *std::min_element(it.begin(), it.end()) << ','
       << mean(it) << ',' << *std::max_element(it.begin(), it.end()) << ','
       << 100.0 * ok / static_cast<double>(t.size()) << '\n';
  }
  return os.str();
}

}  // namespace nlb
