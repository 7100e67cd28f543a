#pragma once

/// @file verifier.hpp
/// Quantifier-free conditions over graph outputs, checked on box domains by
/// branch and bound. Verified is sound; counterexamples are concrete points.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlb/bounds.hpp"
#include "nlb/expr_graph.hpp"
#include "nlb/geometry.hpp"

namespace nlb {

/// Negation normal form over atom literals.
struct Formula {
  enum class Kind : std::uint8_t { True, False, Lit, And, Or };

  Kind kind = Kind::True;
  int atom = -1;
  bool negated = false;
  std::vector<Formula> children;

  static Formula top() { return {}; }
  static Formula bottom();
  static Formula literal(int atom, bool negated = false);
  static Formula all(std::vector<Formula> parts);
  static Formula any(std::vector<Formula> parts);
};

/// NNF negation.
Formula operator!(const Formula& f);
inline Formula operator&&(Formula a, Formula b) { return Formula::all({std::move(a), std::move(b)}); }
inline Formula operator||(Formula a, Formula b) { return Formula::any({std::move(a), std::move(b)}); }

/// One graph output row compared against a constant: g <= c, or g < c when strict.
struct Atom {
  int output = 0;
  double threshold = 0.0;
  bool strict = false;
};

struct Output {
  int node = 0;
  int row = 0;
  bool exact = false;  ///< an input coordinate: its box bounds are exact
};

/// A condition that must hold on every point of the domain boxes.
class Query {
 public:
  explicit Query(int input_dim, std::string name = {});

  ExprGraph graph;
  Formula condition;
  std::vector<BoxRegion> domain;
  /// Independent concrete re-check; true means the point violates the
  /// condition. Candidates failing it are never reported.
  std::function<bool(const Vec&)> violates;
  std::string name;

  Formula le(int node, int row, double c) { return Formula::literal(atom(node, row, c, false)); }
  Formula lt(int node, int row, double c) { return Formula::literal(atom(node, row, c, true)); }
  Formula ge(int node, int row, double c) { return !lt(node, row, c); }
  Formula gt(int node, int row, double c) { return !le(node, row, c); }

  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<Output>& outputs() const { return outputs_; }

  /// Memo for subgraphs built while compiling regions (key, state node) -> node.
  std::map<std::pair<const void*, int>, int> node_cache;
  /// Same, keyed by content for predicates that may be rebuilt elsewhere.
  std::map<std::string, int> keyed_nodes;

 private:
  int atom(int node, int row, double c, bool strict);
  std::vector<Atom> atoms_;
  std::vector<Output> outputs_;
  std::map<std::pair<int, int>, int> output_index_;
  std::map<std::tuple<int, double, bool>, int> atom_index_;
};

/// Concrete evaluation with the exact comparison semantics.
bool evaluate_condition(const Query& q, const Vec& x);

struct BnbConfig {
  std::size_t max_boxes = 5'000'000;
  /// Per-dimension floor below which boxes are not split. Empty: 1e-5 everywhere.
  Vec min_box_width;
  Relaxation relaxation = Relaxation::Linear;
  double soundness_margin = 1e-9;
  int parallel_workers = 1;
  int probe_samples = 32;
  std::size_t max_counterexamples = 1;
  int case_split_limit = 64;  ///< LP-checked assignments per box
  std::uint64_t seed = 0;
  double time_budget_s = 0.0;  ///< 0 = unlimited

  void validate() const;
};

struct VerifierStats {
  std::size_t boxes = 0;
  std::size_t boxes_proven = 0;
  std::size_t boxes_unresolved = 0;
  std::size_t lp_calls = 0;
  std::size_t probes = 0;
  int max_depth = 0;
  double seconds = 0.0;
};

struct Verdict {
  enum class Kind : std::uint8_t { Verified, Counterexample, Unknown };

  Kind kind = Kind::Unknown;
  Vec counterexample;               ///< first violating point
  std::vector<Vec> counterexamples; ///< all collected, first one included
  std::string reason;               ///< Unknown only
  Vec unresolved_center;            ///< Unknown only, when a box was left open
  VerifierStats stats;
  std::string query;

  bool verified() const { return kind == Kind::Verified; }
  bool has_counterexample() const { return kind == Kind::Counterexample; }
};

std::string to_string(Verdict::Kind kind);
nlohmann::json to_json(const Verdict& v);
Verdict verdict_from_json(const nlohmann::json& doc);

/// Proves q.condition on every domain box or finds a concrete violation.
Verdict branch_and_bound(const Query& q, const BnbConfig& cfg);

}  // namespace nlb
