#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <optional>
#include <thread>

#include "nlb/error.hpp"
#include "nlb/lp.hpp"
#include "nlb/rng.hpp"
#include "nlb/verifier.hpp"

namespace nlb {

// ---------------------------------------------------------------- Formula

Formula Formula::bottom() {
  Formula f;
  f.kind = Kind::False;
  return f;
}

Formula Formula::literal(int atom, bool negated) {
  Formula f;
  f.kind = Kind::Lit;
  f.atom = atom;
  f.negated = negated;
  return f;
}

namespace {

Formula combine(Formula::Kind kind, std::vector<Formula> parts) {
  const auto absorbing = kind == Formula::Kind::And ? Formula::Kind::False : Formula::Kind::True;
  const auto neutral = kind == Formula::Kind::And ? Formula::Kind::True : Formula::Kind::False;
  Formula out;
  out.kind = kind;
  for (auto& p : parts) {
    if (p.kind == absorbing) return p;
    if (p.kind == neutral) continue;
    if (p.kind == kind) {
      for (auto& c : p.children) out.children.push_back(std::move(c));
    } else {
      out.children.push_back(std::move(p));
    }
  }
  if (out.children.empty()) {
    Formula n;
    n.kind = neutral;
    return n;
  }
  if (out.children.size() == 1) return std::move(out.children[0]);
  return out;
}

}  // namespace

Formula Formula::all(std::vector<Formula> parts) { return combine(Kind::And, std::move(parts)); }
Formula Formula::any(std::vector<Formula> parts) { return combine(Kind::Or, std::move(parts)); }

Formula operator!(const Formula& f) {
  switch (f.kind) {
    case Formula::Kind::True: return Formula::bottom();
    case Formula::Kind::False: return Formula::top();
    case Formula::Kind::Lit: return Formula::literal(f.atom, !f.negated);
    case Formula::Kind::And:
    case Formula::Kind::Or: {
      std::vector<Formula> parts;
      parts.reserve(f.children.size());
      for (const auto& c : f.children) parts.push_back(!c);
      return f.kind == Formula::Kind::And ? Formula::any(std::move(parts))
                                          : Formula::all(std::move(parts));
    }
  }
  return f;
}

// ---------------------------------------------------------------- Query

Query::Query(int input_dim, std::string query_name)
    : graph(input_dim), name(std::move(query_name)) {}

int Query::atom(int node, int row, double c, bool strict) {
  if (node < 0 || node >= graph.num_nodes() || row < 0 || row >= graph.size_of(node)) {
    throw ShapeError("Query: atom refers to a missing graph output");
  }
  if (std::isnan(c)) throw PreconditionError("Query: NaN threshold");
  auto [it, inserted] = output_index_.try_emplace({node, row}, static_cast<int>(outputs_.size()));
  if (inserted) outputs_.push_back({node, row, node == graph.input()});
  const int out = it->second;
  auto [at, fresh] = atom_index_.try_emplace({out, c, strict}, static_cast<int>(atoms_.size()));
  if (fresh) atoms_.push_back({out, c, strict});
  return at->second;
}

namespace {

enum class Tri : std::int8_t { False = 0, True = 1, Unknown = 2 };

Tri kleene(const Formula& f, const std::vector<Tri>& atoms) {
  switch (f.kind) {
    case Formula::Kind::True: return Tri::True;
    case Formula::Kind::False: return Tri::False;
    case Formula::Kind::Lit: {
      const Tri v = atoms[f.atom];
      if (v == Tri::Unknown) return v;
      return (v == Tri::True) != f.negated ? Tri::True : Tri::False;
    }
    case Formula::Kind::And: {
      Tri acc = Tri::True;
      for (const auto& c : f.children) {
        const Tri v = kleene(c, atoms);
        if (v == Tri::False) return Tri::False;
        if (v == Tri::Unknown) acc = Tri::Unknown;
      }
      return acc;
    }
    case Formula::Kind::Or: {
      Tri acc = Tri::False;
      for (const auto& c : f.children) {
        const Tri v = kleene(c, atoms);
        if (v == Tri::True) return Tri::True;
        if (v == Tri::Unknown) acc = Tri::Unknown;
      }
      return acc;
    }
  }
  return Tri::Unknown;
}

bool atom_holds(const Atom& a, double g) { return a.strict ? g < a.threshold : g <= a.threshold; }

Tri atom_value(const Atom& a, double lo, double hi, bool exact, double margin) {
  const double m = (exact || lo == hi) ? 0.0 : margin;
  const double c = a.threshold;
  if (a.strict) {
    if (hi < c - m) return Tri::True;
    if (lo >= c + m) return Tri::False;
  } else {
    if (hi <= c - m) return Tri::True;
    if (lo > c + m) return Tri::False;
  }
  return Tri::Unknown;
}

void collect_atoms(const Formula& f, std::vector<int>& order, std::vector<char>& seen) {
  if (f.kind == Formula::Kind::Lit) {
    if (!seen[f.atom]) {
      seen[f.atom] = 1;
      order.push_back(f.atom);
    }
    return;
  }
  for (const auto& c : f.children) collect_atoms(c, order, seen);
}

}  // namespace

bool evaluate_condition(const Query& q, const Vec& x) {
  const auto values = q.graph.evaluate_all(x);
  std::vector<Tri> tri(q.atoms().size());
  for (std::size_t i = 0; i < tri.size(); ++i) {
    const Atom& a = q.atoms()[i];
    const Output& o = q.outputs()[a.output];
    tri[i] = atom_holds(a, values[o.node][o.row]) ? Tri::True : Tri::False;
  }
  return kleene(q.condition, tri) == Tri::True;
}

// ---------------------------------------------------------------- config / verdict

void BnbConfig::validate() const {
  if (soundness_margin < 0) throw PreconditionError("BnbConfig: soundness_margin must be >= 0");
  if ((min_box_width.array() < 0).any()) throw PreconditionError("BnbConfig: min_box_width must be >= 0");
  if (max_boxes == 0) throw PreconditionError("BnbConfig: max_boxes must be >= 1");
  if (parallel_workers < 1) throw PreconditionError("BnbConfig: parallel_workers must be >= 1");
  if (probe_samples < 0) throw PreconditionError("BnbConfig: probe_samples must be >= 0");
  if (max_counterexamples == 0) throw PreconditionError("BnbConfig: max_counterexamples must be >= 1");
}

std::string to_string(Verdict::Kind kind) {
  switch (kind) {
    case Verdict::Kind::Verified: return "verified";
    case Verdict::Kind::Counterexample: return "counterexample";
    case Verdict::Kind::Unknown: return "unknown";
  }
  return "unknown";
}

namespace {

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Vec from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const Verdict& v) {
  nlohmann::json j{{"query", v.query}, {"verdict", to_string(v.kind)}};
  if (v.kind == Verdict::Kind::Counterexample) {
    j["counterexample"] = to_std(v.counterexample);
    nlohmann::json all = nlohmann::json::array();
    for (const auto& c : v.counterexamples) all.push_back(to_std(c));
    j["counterexamples"] = all;
  }
  if (v.kind == Verdict::Kind::Unknown) {
    j["reason"] = v.reason;
    if (v.unresolved_center.size()) j["unresolved_center"] = to_std(v.unresolved_center);
  }
  j["stats"] = {{"boxes", v.stats.boxes},
                {"boxes_proven", v.stats.boxes_proven},
                {"boxes_unresolved", v.stats.boxes_unresolved},
                {"lp_calls", v.stats.lp_calls},
                {"probes", v.stats.probes},
                {"max_depth", v.stats.max_depth},
                {"seconds", v.stats.seconds}};
  return j;
}

Verdict verdict_from_json(const nlohmann::json& j) {
  try {
    Verdict v;
    v.query = j.value("query", "");
    const std::string kind = j.at("verdict").get<std::string>();
    if (kind == "verified") {
      v.kind = Verdict::Kind::Verified;
    } else if (kind == "counterexample") {
      v.kind = Verdict::Kind::Counterexample;
      v.counterexample = from_std(j.at("counterexample").get<std::vector<double>>());
      for (const auto& c : j.value("counterexamples", nlohmann::json::array())) {
        v.counterexamples.push_back(from_std(c.get<std::vector<double>>()));
      }
    } else if (kind == "unknown") {
      v.kind = Verdict::Kind::Unknown;
      v.reason = j.value("reason", "");
      if (j.contains("unresolved_center")) {
        v.unresolved_center = from_std(j.at("unresolved_center").get<std::vector<double>>());
      }
    } else {
      throw ParseError("verdict: unknown kind '" + kind + "'");
    }
    if (j.contains("stats")) {
      const auto& s = j.at("stats");
      v.stats.boxes = s.value("boxes", std::size_t{0});
      v.stats.boxes_proven = s.value("boxes_proven", std::size_t{0});
      v.stats.boxes_unresolved = s.value("boxes_unresolved", std::size_t{0});
      v.stats.lp_calls = s.value("lp_calls", std::size_t{0});
      v.stats.probes = s.value("probes", std::size_t{0});
      v.stats.max_depth = s.value("max_depth", 0);
      v.stats.seconds = s.value("seconds", 0.0);
    }
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("verdict: ") + e.what());
  }
}

// ---------------------------------------------------------------- branch and bound

namespace {

struct BoxItem {
  BoxRegion box;
  int depth = 0;
};

struct BoxOutcome {
  enum class Status : std::uint8_t { Proven, Violated, Split, Unresolved };
  Status status = Status::Unresolved;
  Vec point;
  std::vector<BoxItem> children;
  std::size_t lp_calls = 0;
  std::size_t probes = 0;
};

std::uint64_t box_hash(const BoxRegion& b, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (Eigen::Index i = 0; i < b.lower.size(); ++i) {
    h = mix_seed(h, std::bit_cast<std::uint64_t>(b.lower[i]));
    h = mix_seed(h, std::bit_cast<std::uint64_t>(b.upper[i]));
  }
  return h;
}

class BoxSolver {
 public:
  BoxSolver(const Query& q, const BnbConfig& cfg, const Vec& min_width)
      : q_(q), cfg_(cfg), min_width_(min_width) {
    std::vector<char> seen(q.atoms().size(), 0);
    collect_atoms(q.condition, atom_order_, seen);
  }

  BoxOutcome solve(const BoxItem& item) const {
    BoxOutcome out;
    const BoxRegion& box = item.box;
    const IntervalBounds b = bound(q_.graph, box, cfg_.relaxation);

    std::vector<Tri> tri(q_.atoms().size(), Tri::Unknown);
    std::vector<double> lo(q_.outputs().size()), hi(q_.outputs().size());
    for (std::size_t k = 0; k < q_.outputs().size(); ++k) {
      const Output& o = q_.outputs()[k];
      lo[k] = b.lo(o.node, o.row);
      hi[k] = b.hi(o.node, o.row);
    }
    auto refresh = [&] {
      for (std::size_t i = 0; i < tri.size(); ++i) {
        const Atom& a = q_.atoms()[i];
        tri[i] = atom_value(a, lo[a.output], hi[a.output], q_.outputs()[a.output].exact,
                            cfg_.soundness_margin);
      }
    };
    refresh();
    Tri value = kleene(q_.condition, tri);

    std::optional<Vec> lp_point;
    bool may_violate = value != Tri::True;
    if (value == Tri::Unknown && cfg_.relaxation == Relaxation::Linear) {
      // Tighten undecided outputs with backward bounds, then case-split.
      std::vector<std::optional<LinearEnclosure>> enc(q_.outputs().size());
      for (std::size_t i = 0; i < tri.size(); ++i) {
        if (tri[i] != Tri::Unknown) continue;
        const int k = q_.atoms()[i].output;
        if (enc[k]) continue;
        const Output& o = q_.outputs()[k];
        if (o.exact) {
          LinearEnclosure e;
          e.lower.a = RowVec::Zero(box.dim());
          e.lower.a[o.row] = 1.0;
          e.upper = e.lower;
          enc[k] = e;
        } else {
          enc[k] = backward_enclosure(q_.graph, b, o.node, o.row);
          lo[k] = std::max(lo[k], enc[k]->lower.min_over(box));
          hi[k] = std::min(hi[k], enc[k]->upper.max_over(box));
          if (lo[k] > hi[k]) {
            lo[k] = b.lo(o.node, o.row);
            hi[k] = b.hi(o.node, o.row);
          }
        }
      }
      refresh();
      value = kleene(q_.condition, tri);
      if (value == Tri::Unknown) {
        Search s{box, tri, enc, 0, std::nullopt, false};
        std::vector<int> unknown;
        for (int a : atom_order_) {
          if (tri[a] == Tri::Unknown) unknown.push_back(a);
        }
        may_violate = search(s, unknown, 0);
        out.lp_calls = s.lp_calls;
        lp_point = s.point;
      } else {
        may_violate = value != Tri::True;
      }
    }

    if (!may_violate) {
      out.status = BoxOutcome::Status::Proven;
      return out;
    }

    // Probe for a concrete violation before splitting.
    auto try_point = [&](const Vec& x) {
      ++out.probes;
      if (evaluate_condition(q_, x)) return false;
      if (q_.violates && !q_.violates(x)) return false;
      out.status = BoxOutcome::Status::Violated;
      out.point = x;
      return true;
    };
    if (lp_point && try_point(*lp_point)) return out;
    const Vec c = box.center();
    if (try_point(c)) return out;
    const Vec half = 0.5 * box.width();
    for (int i = 0; i < box.dim(); ++i) {
      Vec p = c;
      p[i] = c[i] - half[i];
      if (try_point(p)) return out;
      p[i] = c[i] + half[i];
      if (try_point(p)) return out;
    }
    Rng rng(box_hash(box, cfg_.seed));
    for (int k = 0; k < cfg_.probe_samples; ++k) {
      if (try_point(uniform_in_box(rng, box.lower, box.upper))) return out;
    }

    // Split the widest dimension relative to its floor.
    int dim = -1;
    double best = 0.0;
    for (int i = 0; i < box.dim(); ++i) {
      const double w = box.upper[i] - box.lower[i];
      if (!(w > min_width_[i])) continue;
      const double score = min_width_[i] > 0 ? w / min_width_[i] : w * 1e300;
      if (dim == -1 || score > best) {
        dim = i;
        best = score;
      }
    }
    if (dim == -1) {
      out.status = BoxOutcome::Status::Unresolved;
      out.point = c;
      return out;
    }
    const double mid = 0.5 * (box.lower[dim] + box.upper[dim]);
    BoxRegion left = box, right = box;
    left.upper[dim] = mid;
    right.lower[dim] = mid;
    out.status = BoxOutcome::Status::Split;
    out.children = {{std::move(left), item.depth + 1}, {std::move(right), item.depth + 1}};
    return out;
  }

 private:
  struct Search {
    const BoxRegion& box;
    std::vector<Tri> tri;
    const std::vector<std::optional<LinearEnclosure>>& enc;
    std::size_t lp_calls;
    std::optional<Vec> point;
    bool budget_hit;
  };

  // Builds the LP rows implied by the assigned literals.
  std::optional<Vec> feasible(Search& s, const std::vector<int>& assigned) const {
    const int d = s.box.dim();
    Mat a(static_cast<Eigen::Index>(assigned.size()), d);
    Vec rhs(static_cast<Eigen::Index>(assigned.size()));
    const Vec mag = s.box.lower.cwiseAbs().cwiseMax(s.box.upper.cwiseAbs());
    for (std::size_t r = 0; r < assigned.size(); ++r) {
      const Atom& at = q_.atoms()[assigned[r]];
      const LinearEnclosure& e = *s.enc[at.output];
      const double m = q_.outputs()[at.output].exact ? 0.0 : cfg_.soundness_margin;
      if (s.tri[assigned[r]] == Tri::True) {
        // g <= c somewhere needs lower(x) <= c
        a.row(r) = e.lower.a;
        rhs[r] = at.threshold - e.lower.c + m +
                 1e-12 * (e.lower.a.cwiseAbs().dot(mag) + std::abs(e.lower.c));
      } else {
        // g >= c somewhere needs upper(x) >= c
        a.row(r) = -e.upper.a;
        rhs[r] = e.upper.c - at.threshold + m +
                 1e-12 * (e.upper.a.cwiseAbs().dot(mag) + std::abs(e.upper.c));
      }
    }
    ++s.lp_calls;
    const LpResult r = box_lp_feasibility(a, rhs, s.box);
    if (r.status == LpResult::Status::Infeasible) return std::nullopt;
    if (r.status == LpResult::Status::Feasible) return r.point;
    return s.box.center();
  }

  // True when some assignment of the unknown atoms may falsify the
  // condition inside the box.
  bool search(Search& s, const std::vector<int>& unknown, std::size_t next) const {
    const Tri value = kleene(q_.condition, s.tri);
    if (value == Tri::True) return false;
    std::vector<int> assigned(unknown.begin(), unknown.begin() + static_cast<long>(next));
    if (!assigned.empty()) {
      if (s.lp_calls >= static_cast<std::size_t>(cfg_.case_split_limit)) {
        s.budget_hit = true;
        return true;
      }
      auto p = feasible(s, assigned);
      if (!p) return false;
      if (value == Tri::False) {
        s.point = *p;
        return true;
      }
    } else if (value == Tri::False) {
      return true;
    }
    if (next >= unknown.size()) return true;
    const int a = unknown[next];
    for (Tri v : {Tri::False, Tri::True}) {
      s.tri[a] = v;
      const bool hit = search(s, unknown, next + 1);
      s.tri[a] = Tri::Unknown;
      if (hit) return true;
    }
    return false;
  }

  const Query& q_;
  const BnbConfig& cfg_;
  const Vec& min_width_;
  std::vector<int> atom_order_;
};

}  // namespace

Verdict branch_and_bound(const Query& q, const BnbConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const int d = q.graph.input_dim();
  Vec min_width = cfg.min_box_width.size() ? cfg.min_box_width : Vec::Constant(d, 1e-5);
  if (min_width.size() != d) throw ShapeError("BnbConfig: min_box_width has the wrong dimension");

  Verdict v;
  v.query = q.name;
  std::vector<BoxItem> stack;
  for (auto it = q.domain.rbegin(); it != q.domain.rend(); ++it) {
    if (it->dim() != d) throw ShapeError("branch_and_bound: domain box dimension mismatch");
    stack.push_back({*it, 0});
  }

  BoxSolver solver(q, cfg, min_width);
  constexpr std::size_t kBatch = 256;
  std::optional<std::string> stop_reason;

  while (!stack.empty()) {
    if (v.stats.boxes >= cfg.max_boxes) {
      stop_reason = "box budget exhausted";
      break;
    }
    if (cfg.time_budget_s > 0) {
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (elapsed > cfg.time_budget_s) {
        stop_reason = "time budget exhausted";
        break;
      }
    }
    const std::size_t n = std::min({kBatch, stack.size(), cfg.max_boxes - v.stats.boxes});
    std::vector<BoxItem> batch(n);
    for (std::size_t i = 0; i < n; ++i) {
      batch[i] = std::move(stack.back());
      stack.pop_back();
    }
    std::vector<BoxOutcome> results(n);
    const int workers = std::min<int>(cfg.parallel_workers, static_cast<int>(n));
    if (workers <= 1) {
      for (std::size_t i = 0; i < n; ++i) results[i] = solver.solve(batch[i]);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::jthread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t i = next++; i < n; i = next++) results[i] = solver.solve(batch[i]);
        });
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      auto& r = results[i];
      ++v.stats.boxes;
      v.stats.lp_calls += r.lp_calls;
      v.stats.probes += r.probes;
      v.stats.max_depth = std::max(v.stats.max_depth, batch[i].depth);
      switch (r.status) {
        case BoxOutcome::Status::Proven: ++v.stats.boxes_proven; break;
        case BoxOutcome::Status::Violated:
          if (v.counterexamples.size() < cfg.max_counterexamples) v.counterexamples.push_back(r.point);
          break;
        case BoxOutcome::Status::Unresolved:
          ++v.stats.boxes_unresolved;
          if (v.unresolved_center.size() == 0) v.unresolved_center = r.point;
          break;
        case BoxOutcome::Status::Split: break;
      }
    }
    if (v.counterexamples.size() >= cfg.max_counterexamples) break;
    for (std::size_t i = n; i-- > 0;) {
      auto& ch = results[i].children;
      for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(std::move(*it));
    }
  }

  v.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!v.counterexamples.empty()) {
    v.kind = Verdict::Kind::Counterexample;
    v.counterexample = v.counterexamples.front();
  } else if (stop_reason) {
    v.kind = Verdict::Kind::Unknown;
    v.reason = *stop_reason;
    if (v.unresolved_center.size() == 0 && !stack.empty()) v.unresolved_center = stack.back().box.center();
  } else if (v.stats.boxes_unresolved > 0) {
    v.kind = Verdict::Kind::Unknown;
    v.reason = std::to_string(v.stats.boxes_unresolved) + " box(es) at minimum width left undecided";
  } else {
    v.kind = Verdict::Kind::Verified;
  }
  return v;
}

}  // namespace nlb
