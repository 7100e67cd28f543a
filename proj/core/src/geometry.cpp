#include "nlb/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "nlb/dynamics.hpp"
#include "nlb/error.hpp"
#include "nlb/nn.hpp"
#include "nlb/rng.hpp"

namespace nlb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double norm_of(const Vec& s, const std::vector<int>& dims) {
  double acc = 0.0;
  for (int d : dims) acc += s[d] * s[d];
  return std::sqrt(acc);
}

// Volume with degenerate (zero-width) dimensions contributing a factor 1, so
// thin slices can still be sampled.
double box_weight(const BoxRegion& b) {
  double w = 1.0;
  for (int i = 0; i < b.dim(); ++i) {
    const double len = b.upper[i] - b.lower[i];
    if (len > 0) w *= len;
  }
  return w;
}

// a \ b as disjoint boxes (closed boxes; shared faces are measure zero).
std::vector<BoxRegion> subtract(const BoxRegion& a, const BoxRegion& b) {
  auto inter = a.intersect(b);
  if (!inter) return {a};
  std::vector<BoxRegion> out;
  BoxRegion rest = a;
  for (int i = 0; i < a.dim(); ++i) {
    if (rest.lower[i] < inter->lower[i]) {
      BoxRegion slab = rest;
      slab.upper[i] = inter->lower[i];
      out.push_back(slab);
    }
    if (rest.upper[i] > inter->upper[i]) {
      BoxRegion slab = rest;
      slab.lower[i] = inter->upper[i];
      out.push_back(slab);
    }
    rest.lower[i] = inter->lower[i];
    rest.upper[i] = inter->upper[i];
  }
  return out;
}

std::vector<BoxRegion> subtract_all(std::vector<BoxRegion> from, const std::vector<BoxRegion>& cut) {
  for (const auto& c : cut) {
    std::vector<BoxRegion> next;
    for (const auto& f : from) {
      auto pieces = subtract(f, c);
      next.insert(next.end(), pieces.begin(), pieces.end());
    }
    from = std::move(next);
  }
  return from;
}

std::string fmt_vec(const Vec& v) {
  std::ostringstream os;
  os << '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ']';
  return os.str();
}

RwaTask build_task(std::string name, int dim, const std::vector<int>& pos, const std::vector<int>& vel,
                   double a, const DockingTaskOptions& o) {
  if (!(a >= 1.0)) throw PreconditionError("task half-width a must be >= 1");
  check_directions(o.n_directions);
  const double outer = a + 1.0;
  // Speeds allowed outside X_U must fit in the domain so x' in not-X_U stays in X.
  const double worst_speed = o.base_speed + 2.0 * o.mean_motion * std::sqrt(double(pos.size())) * outer;
  if (o.v_max < worst_speed) {
    throw PreconditionError("v_max too small for the speed limit at the outer boundary");
  }

  auto make_box = [&](double p, double v) {
    Vec lo(dim), hi(dim);
    for (int d : pos) { lo[d] = -p; hi[d] = p; }
    for (int d : vel) { lo[d] = -v; hi[d] = v; }
    return BoxRegion(lo, hi);
  };

  SpeedLimit limit;
  limit.position_dims = pos;
  limit.velocity_dims = vel;
  limit.base_speed = o.base_speed;
  limit.slope = 2.0 * o.mean_motion;
  limit.n_directions = o.n_directions;
  const Region speeding = Region::velocity_unsafe(limit).with_label("speed_violation");

  RwaTask t;
  t.name = std::move(name);
  t.initial = Region::box(make_box(a, o.v_tol)).with_label("X_I");
  t.goal = Region::intersection_of({Region::box(make_box(o.goal_half_width, kInf)),
                                    Region::complement(speeding)})
               .with_label("X_G");
  t.unsafe = Region::union_of({Region::complement_box(make_box(outer, kInf)), speeding})
                 .with_label("X_U");
  t.domain = make_box(outer, o.v_max);
  return t;
}

}  // namespace

BoxRegion::BoxRegion(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size()) throw ShapeError("BoxRegion: bound sizes differ");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (std::isnan(lower[i]) || std::isnan(upper[i]) || lower[i] > upper[i]) {
      throw PreconditionError("BoxRegion: lower must be <= upper componentwise");
    }
  }
}

bool BoxRegion::contains(const Vec& s) const {
  if (s.size() != lower.size()) throw ShapeError("BoxRegion::contains: dimension mismatch");
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (!(s[i] >= lower[i] && s[i] <= upper[i])) return false;
  }
  return true;
}

bool BoxRegion::is_finite() const { return lower.allFinite() && upper.allFinite(); }

Vec BoxRegion::center() const { return 0.5 * (lower + upper); }

Vec BoxRegion::width() const { return upper - lower; }

std::optional<BoxRegion> BoxRegion::intersect(const BoxRegion& other) const {
  if (other.dim() != dim()) throw ShapeError("BoxRegion::intersect: dimension mismatch");
  Vec lo = lower.cwiseMax(other.lower);
  Vec hi = upper.cwiseMin(other.upper);
  if ((lo.array() > hi.array()).any()) return std::nullopt;
  return BoxRegion(lo, hi);
}

bool BoxRegion::operator==(const BoxRegion& other) const {
  return lower.size() == other.lower.size() && lower == other.lower && upper == other.upper;
}

void check_directions(int n_directions) {
  if (n_directions <= 0 || n_directions % 4 != 0) {
    throw PreconditionError("n_directions must be a positive multiple of 4");
  }
}

double under_norm(double u1, double u2, int n_directions) {
  check_directions(n_directions);
  const double a1 = std::abs(u1);
  const double a2 = std::abs(u2);
  double best = -kInf;
  for (int i = 0; i <= n_directions / 4; ++i) {
    const double ang = 2.0 * i * std::numbers::pi / n_directions;
    best = std::max(best, a1 * std::cos(ang) + a2 * std::sin(ang));
  }
  return best;
}

double over_norm(double u1, double u2, int n_directions) {
  return under_norm(u1, u2, n_directions) / std::cos(std::numbers::pi / n_directions);
}

double SpeedLimit::violation_margin(const Vec& s) const {
  if (velocity_dims.size() == 1 && position_dims.size() == 1) {
    return std::abs(s[velocity_dims[0]]) - base_speed - slope * std::abs(s[position_dims[0]]);
  }
  if (velocity_dims.size() != 2 || position_dims.size() != 2) {
    throw PreconditionError("SpeedLimit supports 1 or 2 position/velocity dimensions");
  }
  const double v = over_norm(s[velocity_dims[0]], s[velocity_dims[1]], n_directions);
  const double p = under_norm(s[position_dims[0]], s[position_dims[1]], n_directions);
  return v - base_speed - slope * p;
}

double SpeedLimit::exact_margin(const Vec& s) const {
  return norm_of(s, velocity_dims) - base_speed - slope * norm_of(s, position_dims);
}

bool velocity_unsafe_overapprox(const Vec& s, int n_directions, double mean_motion) {
  if (s.size() != 4) throw ShapeError("velocity_unsafe_overapprox: expected a 4-state");
  SpeedLimit l;
  l.position_dims = {0, 1};
  l.velocity_dims = {2, 3};
  l.slope = 2.0 * mean_motion;
  l.n_directions = n_directions;
  return l.violation_margin(s) >= 0.0;
}

// ---------------------------------------------------------------- Region

Region Region::box(BoxRegion b) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Box;
  n->box = std::move(b);
  Region r;
  r.node_ = std::move(n);
  return r;
}

Region Region::complement_box(BoxRegion b) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::ComplementBox;
  n->box = std::move(b);
  Region r;
  r.node_ = std::move(n);
  return r;
}

Region Region::velocity_unsafe(SpeedLimit limit) {
  check_directions(limit.n_directions);
  if (limit.position_dims.size() != limit.velocity_dims.size() || limit.position_dims.empty() ||
      limit.position_dims.size() > 2) {
    throw PreconditionError("velocity_unsafe: need 1 or 2 matching position/velocity dims");
  }
  auto n = std::make_shared<Node>();
  n->kind = Kind::VelocityUnsafeOverapprox;
  n->speed = std::move(limit);
  Region r;
  r.node_ = std::move(n);
  return r;
}

Region Region::cert_sublevel(std::shared_ptr<const Mlp> net, double threshold, std::string name) {
  if (net && net->output_dim() != 1) throw ShapeError("cert_sublevel: certificate must be scalar");
  auto n = std::make_shared<Node>();
  n->kind = Kind::CertSublevel;
  n->certificate = std::move(net);
  n->certificate_name = std::move(name);
  n->threshold = threshold;
  Region r;
  r.node_ = std::move(n);
  return r;
}

Region Region::union_of(std::vector<Region> children) {
  if (children.empty()) throw PreconditionError("union_of: no children");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Union;
  n->children = std::move(children);
  Region r;
  r.node_ = std::move(n);
  return r;
}

Region Region::intersection_of(std::vector<Region> children) {
  if (children.empty()) throw PreconditionError("intersection_of: no children");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Intersection;
  n->children = std::move(children);
  Region r;
  r.node_ = std::move(n);
  return r;
}

Region Region::complement(Region child) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Complement;
  n->children = {std::move(child)};
  Region r;
  r.node_ = std::move(n);
  return r;
}

Region::Kind Region::kind() const { return node().kind; }

const Region::Node& Region::node() const {
  if (!node_) throw Error("empty Region");
  return *node_;
}

bool Region::contains(const Vec& s) const {
  const Node& n = node();
  switch (n.kind) {
    case Kind::Box: return n.box.contains(s);
    case Kind::ComplementBox: return !n.box.contains(s);
    case Kind::VelocityUnsafeOverapprox: return n.speed.violation_margin(s) >= 0.0;
    case Kind::CertSublevel:
      if (!n.certificate) {
        throw Error("dangling certificate reference '" + n.certificate_name + "' in region");
      }
      return n.certificate->forward_scalar(s) <= n.threshold;
    case Kind::Union:
      return std::any_of(n.children.begin(), n.children.end(),
                         [&](const Region& c) { return c.contains(s); });
    case Kind::Intersection:
      return std::all_of(n.children.begin(), n.children.end(),
                         [&](const Region& c) { return c.contains(s); });
    case Kind::Complement: return !n.children[0].contains(s);
  }
  return false;
}

bool Region::same_as(const Region& other) const {
  if (node_ == other.node_) return true;
  if (!node_ || !other.node_) return false;
  const Node& a = *node_;
  const Node& b = *other.node_;
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Kind::Box:
    case Kind::ComplementBox: return a.box == b.box;
    case Kind::VelocityUnsafeOverapprox:
      return a.speed.position_dims == b.speed.position_dims &&
             a.speed.velocity_dims == b.speed.velocity_dims &&
             a.speed.base_speed == b.speed.base_speed && a.speed.slope == b.speed.slope &&
             a.speed.n_directions == b.speed.n_directions;
    case Kind::CertSublevel: return a.certificate == b.certificate && a.threshold == b.threshold;
    default:
      if (a.children.size() != b.children.size()) return false;
      for (std::size_t i = 0; i < a.children.size(); ++i) {
        if (!a.children[i].same_as(b.children[i])) return false;
      }
      return true;
  }
}

bool Region::box_structured() const {
  const Node& n = node();
  switch (n.kind) {
    case Kind::Box:
    case Kind::ComplementBox: return true;
    case Kind::VelocityUnsafeOverapprox:
    case Kind::CertSublevel: return false;
    default:
      return std::all_of(n.children.begin(), n.children.end(),
                         [](const Region& c) { return c.box_structured(); });
  }
}

std::string Region::describe() const {
  const Node& n = node();
  switch (n.kind) {
    case Kind::Box: return "Box(" + fmt_vec(n.box.lower) + ".." + fmt_vec(n.box.upper) + ")";
    case Kind::ComplementBox:
      return "ComplementBox(" + fmt_vec(n.box.lower) + ".." + fmt_vec(n.box.upper) + ")";
    case Kind::VelocityUnsafeOverapprox:
      return "VelocityUnsafe(nd=" + std::to_string(n.speed.n_directions) + ")";
    case Kind::CertSublevel: {
      std::ostringstream os;
      os << "CertSublevel(" << (n.certificate_name.empty() ? "<anon>" : n.certificate_name)
         << " <= " << n.threshold << ")";
      return os.str();
    }
    default: {
      std::string out = n.kind == Kind::Union          ? "Union("
                        : n.kind == Kind::Intersection ? "Intersection("
                                                       : "Complement(";
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) out += ", ";
        out += n.children[i].describe();
      }
      return out + ")";
    }
  }
}

Region Region::with_label(std::string label) const {
  Region r = *this;
  r.label_ = std::move(label);
  return r;
}

// ---------------------------------------------------------------- tasks

RwaTask make_docking_task(double a, const DockingTaskOptions& options) {
  std::ostringstream name;
  name << "docking(a=" << a << ")";
  return build_task(name.str(), 4, {0, 1}, {2, 3}, a, options);
}

RwaTask make_surrogate_task(double a, const DockingTaskOptions& options) {
  std::ostringstream name;
  name << "surrogate(a=" << a << ")";
  return build_task(name.str(), 2, {0}, {1}, a, options);
}

RwaTask make_task_for(const Plant& plant, double a, const DockingTaskOptions& options) {
  if (plant.name == "spacecraft") return make_docking_task(a, options);
  if (plant.name == "double_integrator") return make_surrogate_task(a, options);
  std::ostringstream name;
  name << plant.name << "(a=" << a << ")";
  return build_task(name.str(), plant.state_dim(), plant.position_dims, plant.velocity_dims, a,
                    options);
}

// ---------------------------------------------------------------- sampling

std::vector<BoxRegion> box_cover(const Region& r, const BoxRegion& universe) {
  const auto& n = r.node();
  switch (n.kind) {
    case Region::Kind::Box: {
      auto b = n.box.intersect(universe);
      if (b) return {*b};
      return {};
    }
    case Region::Kind::ComplementBox: return subtract(universe, n.box);
    case Region::Kind::Intersection: {
      std::vector<BoxRegion> acc = box_cover(n.children[0], universe);
      for (std::size_t i = 1; i < n.children.size() && !acc.empty(); ++i) {
        const auto other = box_cover(n.children[i], universe);
        std::vector<BoxRegion> next;
        for (const auto& a : acc) {
          for (const auto& b : other) {
            if (auto c = a.intersect(b)) next.push_back(*c);
          }
        }
        acc = std::move(next);
      }
      return acc;
    }
    case Region::Kind::Union: {
      std::vector<BoxRegion> acc;
      for (const auto& c : n.children) {
        auto pieces = subtract_all(box_cover(c, universe), acc);
        acc.insert(acc.end(), pieces.begin(), pieces.end());
      }
      return acc;
    }
    case Region::Kind::Complement:
      if (n.children[0].box_structured()) {
        return subtract_all({universe}, box_cover(n.children[0], universe));
      }
      return {universe};
    default: return {universe};
  }
}

std::vector<Vec> sample_region(const Region& r, const BoxRegion& bounds, std::size_t count,
                               std::uint64_t seed, std::size_t max_attempts_per_sample,
                               SampleStats* stats) {
  if (!bounds.is_finite()) throw PreconditionError("sample_region: bounds must be finite");
  const std::string name = r.label().empty() ? r.describe() : r.label();
  std::vector<BoxRegion> cover = box_cover(r, bounds);
  if (cover.empty()) throw SamplingError("sample_region: region '" + name + "' is empty in bounds");

  std::vector<double> cumulative;
  double total = 0.0;
  for (const auto& b : cover) {
    total += box_weight(b);
    cumulative.push_back(total);
  }

  Rng rng(seed);
  std::vector<Vec> out;
  out.reserve(count);
  SampleStats local;
  for (std::size_t k = 0; k < count; ++k) {
    bool accepted = false;
    for (std::size_t attempt = 0; attempt < max_attempts_per_sample; ++attempt) {
      ++local.attempts;
      const double pick = uniform(rng, 0.0, total);
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
      const auto& b = cover[std::min<std::size_t>(it - cumulative.begin(), cover.size() - 1)];
      Vec s = uniform_in_box(rng, b.lower, b.upper);
      if (r.contains(s)) {
        out.push_back(std::move(s));
        ++local.accepted;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (stats) *stats = local;
      throw SamplingError("sample_region: rejection budget exhausted for region '" + name + "'");
    }
  }
  if (stats) *stats = local;
  return out;
}

}  // namespace nlb
