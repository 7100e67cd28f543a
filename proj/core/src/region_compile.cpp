#include "nlb/region_compile.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "nlb/error.hpp"
#include "nlb/nn.hpp"

namespace nlb {

int under_norm_node(ExprGraph& g, int pair, int n_directions) {
  check_directions(n_directions);
  const int k = g.size_of(pair);
  if (k == 1) return g.abs(pair);
  if (k != 2) throw ShapeError("under_norm_node: expected a 1- or 2-row node");
  const int a = g.abs(pair);
  const int m = n_directions / 4 + 1;
  Mat dirs(m, 2);
  for (int i = 0; i < m; ++i) {
    const double ang = 2.0 * i * std::numbers::pi / n_directions;
    dirs(i, 0) = std::cos(ang);
    dirs(i, 1) = std::sin(ang);
  }
  return g.max_reduce(g.affine(a, dirs, Vec::Zero(m)));
}

int over_norm_node(ExprGraph& g, int pair, int n_directions) {
  const int u = under_norm_node(g, pair, n_directions);
  if (g.size_of(pair) == 1) return u;
  Mat s(1, 1);
  s(0, 0) = 1.0 / std::cos(std::numbers::pi / n_directions);
  return g.affine(u, s, Vec::Zero(1));
}

int speed_margin_node(Query& q, const SpeedLimit& limit, int state) {
  auto& g = q.graph;
  const int pos = g.rows(state, limit.position_dims);
  const int vel = g.rows(state, limit.velocity_dims);
  const int v = over_norm_node(g, vel, limit.n_directions);
  const int p = under_norm_node(g, pos, limit.n_directions);
  Mat w(1, 2);
  w << 1.0, -limit.slope;
  Vec c(1);
  c << -limit.base_speed;
  return g.affine(g.concat({v, p}), w, c);
}

Formula in_region(Query& q, const Region& r, int state) {
  const auto& n = r.node();
  using K = Region::Kind;
  switch (n.kind) {
    case K::Box:
    case K::ComplementBox: {
      std::vector<Formula> faces;
      for (int i = 0; i < n.box.dim(); ++i) {
        if (std::isfinite(n.box.lower[i])) faces.push_back(q.ge(state, i, n.box.lower[i]));
        if (std::isfinite(n.box.upper[i])) faces.push_back(q.le(state, i, n.box.upper[i]));
      }
      Formula inside = Formula::all(std::move(faces));
      return n.kind == K::Box ? inside : !inside;
    }
    case K::VelocityUnsafeOverapprox: {
      // Equal limits share one node (and so one atom) even when they come
      // from separately built tasks.
      std::ostringstream key;
      key.precision(17);
      key << "speed/" << state << '/' << n.speed.base_speed << '/' << n.speed.slope << '/'
          << n.speed.n_directions;
      for (int d : n.speed.position_dims) key << ",p" << d;
      for (int d : n.speed.velocity_dims) key << ",v" << d;
      auto it = q.keyed_nodes.find(key.str());
      const int m = it != q.keyed_nodes.end() ? it->second
                                              : (q.keyed_nodes[key.str()] = speed_margin_node(q, n.speed, state));
      return q.ge(m, 0, 0.0);
    }
    case K::CertSublevel: {
      if (!n.certificate) {
        throw Error("dangling certificate reference '" + n.certificate_name + "' in region");
      }
      const auto key = std::make_pair(static_cast<const void*>(n.certificate.get()), state);
      auto it = q.node_cache.find(key);
      const int out = it != q.node_cache.end()
                          ? it->second
                          : (q.node_cache[key] = q.graph.network(state, *n.certificate));
      return q.le(out, 0, n.threshold);
    }
    case K::Union:
    case K::Intersection: {
      std::vector<Formula> parts;
      for (const auto& c : n.children) parts.push_back(in_region(q, c, state));
      return n.kind == K::Union ? Formula::any(std::move(parts)) : Formula::all(std::move(parts));
    }
    case K::Complement: return !in_region(q, n.children[0], state);
  }
  return Formula::bottom();
}

}  // namespace nlb
