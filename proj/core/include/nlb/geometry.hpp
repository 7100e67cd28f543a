#pragma once

/// @file geometry.hpp
/// Piecewise-linear region predicates over the state space and the
/// reach-while-avoid task descriptions built from them.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nlb/types.hpp"

namespace nlb {

class Mlp;
struct Plant;

/// Axis-aligned box; bounds may be infinite.
struct BoxRegion {
  Vec lower;
  Vec upper;

  BoxRegion() = default;
  BoxRegion(Vec lo, Vec hi);

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vec& s) const;
  bool is_finite() const;
  Vec center() const;
  Vec width() const;
  /// Component-wise intersection; std::nullopt when empty.
  std::optional<BoxRegion> intersect(const BoxRegion& other) const;
  bool operator==(const BoxRegion& other) const;
};

/// Lower bound of the Euclidean norm from n_directions/4 + 1 support directions.
double under_norm(double u1, double u2, int n_directions);
/// under_norm / cos(pi / n_directions); never below the true norm.
double over_norm(double u1, double u2, int n_directions);
/// Throws PreconditionError unless n_directions is a positive multiple of 4.
void check_directions(int n_directions);

/// Distance-dependent speed limit |v| <= base + slope * |p|, with the norms
/// replaced by their piecewise-linear approximations.
struct SpeedLimit {
  std::vector<int> position_dims;
  std::vector<int> velocity_dims;
  double base_speed = 0.2;
  double slope = 2.0 * 0.001027;  ///< 2n
  int n_directions = 8;

  /// over(v) - base - slope * under(p); >= 0 is the overapproximated violation.
  double violation_margin(const Vec& s) const;
  /// Exact-norm margin |v| - base - slope*|p| (> 0 is a true violation).
  double exact_margin(const Vec& s) const;
};

/// True iff over(xdot, ydot) >= 0.2 + 2n * under(x, y).
bool velocity_unsafe_overapprox(const Vec& s, int n_directions, double mean_motion = 0.001027);

/// Immutable predicate tree over states. Cheap to copy (shared nodes).
class Region {
 public:
  enum class Kind : std::uint8_t {
    Box,
    ComplementBox,
    VelocityUnsafeOverapprox,
    CertSublevel,
    Union,
    Intersection,
    Complement,
  };

  struct Node {
    Kind kind = Kind::Box;
    BoxRegion box;
    SpeedLimit speed;
    std::shared_ptr<const Mlp> certificate;  ///< raw network, CertSublevel only
    std::string certificate_name;            ///< reference name used in files
    double threshold = 0.0;
    std::vector<Region> children;
  };

  Region() = default;

  static Region box(BoxRegion b);
  static Region complement_box(BoxRegion b);
  static Region velocity_unsafe(SpeedLimit limit);
  static Region cert_sublevel(std::shared_ptr<const Mlp> net, double threshold,
                              std::string name = {});
  static Region union_of(std::vector<Region> children);
  static Region intersection_of(std::vector<Region> children);
  static Region complement(Region child);

  bool valid() const { return node_ != nullptr; }
  Kind kind() const;
  const Node& node() const;

  /// Throws Error for a CertSublevel node whose network reference is dangling.
  bool contains(const Vec& s) const;

  /// Structural equality; certificate nodes compare by object identity.
  bool same_as(const Region& other) const;

  /// True when membership depends only on axis-aligned bounds.
  bool box_structured() const;

  std::string describe() const;
  const std::string& label() const { return label_; }
  Region with_label(std::string label) const;

 private:
  std::shared_ptr<const Node> node_;
  std::string label_;
};

/// Declarative reach-while-avoid task (initial, goal, unsafe, bounding domain).
struct RwaTask {
  std::string name;
  Region initial;
  Region goal;
  Region unsafe;
  BoxRegion domain;
};

struct DockingTaskOptions {
  double goal_half_width = 0.35;
  int n_directions = 8;
  double v_tol = 1e-6;
  double v_max = 0.5;
  double mean_motion = 0.001027;
  double base_speed = 0.2;
};

/// Spacecraft task with X_I = [-a,a]^2 at rest, X_U outside [-(a+1), a+1]^2
/// or over the speed limit, X_G = [-0.35,0.35]^2 within the speed limit.
RwaTask make_docking_task(double a, const DockingTaskOptions& options = {});

/// Same construction for the 1-D double-integrator surrogate (state (p, v)).
RwaTask make_surrogate_task(double a, const DockingTaskOptions& options = {});

/// Dispatches on the plant name.
RwaTask make_task_for(const Plant& plant, double a, const DockingTaskOptions& options = {});

struct SampleStats {
  std::size_t attempts = 0;
  std::size_t accepted = 0;
};

/// Uniform rejection samples of r within bounds. Throws SamplingError naming
/// the region when the attempt budget is exhausted.
std::vector<Vec> sample_region(const Region& r, const BoxRegion& bounds, std::size_t count,
                               std::uint64_t seed, std::size_t max_attempts_per_sample = 10000,
                               SampleStats* stats = nullptr);

/// Finite box list whose union contains r within universe (exact for
/// box-structured regions, otherwise the universe itself).
std::vector<BoxRegion> box_cover(const Region& r, const BoxRegion& universe);

}  // namespace nlb
