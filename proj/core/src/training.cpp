#include "nlb/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "nlb/error.hpp"
#include "nlb/rng.hpp"

namespace nlb {

std::pair<double, double> margins_for(DeltaReading reading) {
  if (reading == DeltaReading::Range) return {1e-4, 1e-4};
  return {1e-4 - 1e-5, 1e-4 - 1e-7};
}

std::string to_string(DeltaReading r) { return r == DeltaReading::Range ? "range" : "difference"; }

DeltaReading delta_reading_from_string(const std::string& s) {
  if (s == "difference") return DeltaReading::Difference;
  if (s == "range") return DeltaReading::Range;
  throw ParseError("unknown delta reading '" + s + "' (expected difference or range)");
}

void TrainConfig::validate() const {
  if (c_s < 0 || c_d < 0 || c_u < 0) throw PreconditionError("TrainConfig: loss weights must be >= 0");
  if (!(delta1 > 0) || !(delta2 > 0)) throw PreconditionError("TrainConfig: margins must be > 0");
  if (!(lr_initial > 0) || !(lr_finetune > 0)) {
    throw PreconditionError("TrainConfig: learning rates must be > 0");
  }
  if (epochs_max < 0) throw PreconditionError("TrainConfig: epochs_max must be >= 0");
  if (neighbor_count < 0 || !(neighbor_radius >= 0)) {
    throw PreconditionError("TrainConfig: neighbor_count and neighbor_radius must be >= 0");
  }
  if (zero_loss_tol < 0 || std::isnan(zero_loss_tol)) {
    throw PreconditionError("TrainConfig: zero_loss_tol must be >= 0");
  }
  if (controller_hidden.empty() || certificate_hidden.empty()) {
    throw PreconditionError("TrainConfig: networks need at least one hidden layer");
  }
}

void Dataset::add(Vec p, Provenance tag) {
  points.push_back(std::move(p));
  tags.push_back(tag);
}

bool legal_training_point(const RwaTask& task, const Vec& x, bool allow_unsafe) {
  if (!task.domain.contains(x)) return false;
  if (task.initial.contains(x)) return true;
  const bool unsafe = task.unsafe.contains(x);
  if (unsafe) return allow_unsafe;
  return !task.goal.contains(x);
}

// ---------------------------------------------------------------- losses

namespace {

struct Pass {
  LossTerms terms;
  Mat x, xn;
  Vec adj_v;      // d O / d V(x_i), raw network only
  Vec adj_vnext;  // d O / d V(x'_i)
  Mat clip_mask;  // 1 where the raw control is strictly inside the thrust box
};

Mat stack(const Dataset& data, int dim) {
  Mat x(dim, static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.points[i].size() != dim) throw ShapeError("dataset point has the wrong dimension");
    x.col(static_cast<Eigen::Index>(i)) = data.points[i];
  }
  return x;
}

Pass run_pass(const Dataset& data, const Mlp& cert, const Mlp& ctrl, const Plant& plant,
              const RwaTask& task, const CertificateForm& form, const TrainConfig& cfg) {
  if (data.empty()) throw PreconditionError("loss: dataset is empty");
  const int d = plant.state_dim();
  if (cert.input_dim() != d || cert.output_dim() != 1) throw ShapeError("certificate must map R^d -> R");
  if (ctrl.input_dim() != d || ctrl.output_dim() != plant.input_dim()) {
    throw ShapeError("controller shape does not match the plant");
  }
  const auto n = static_cast<Eigen::Index>(data.size());
  const double lim = plant.thrust_limit;
  const double beta = form.witness.beta;
  const double eps = form.witness.epsilon;

  Pass p;
  p.x = stack(data, d);
  const Mat& x = p.x;
  const Mat raw_u = ctrl.forward_batch(x);
  const Mat u = raw_u.cwiseMax(-lim).cwiseMin(lim);
  p.clip_mask = (raw_u.array().abs() < lim).cast<double>().matrix();
  p.xn = plant.step.a_matrix * x + plant.step.b_matrix * u;
  p.xn.colwise() += plant.step.c_vector;
  const Mat& xn = p.xn;

  const RowVec v = cert.forward_batch(x).row(0);
  const RowVec vn = cert.forward_batch(xn).row(0);
  p.adj_v = Vec::Zero(n);
  p.adj_vnext = Vec::Zero(n);

  std::vector<Eigen::Index> init_idx, dec_idx, unsafe_idx;
  std::vector<double> v_eff(static_cast<std::size_t>(n));
  std::vector<bool> v_raw(static_cast<std::size_t>(n), true);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec& xi = data.points[static_cast<std::size_t>(i)];
    const bool in_g = task.goal.contains(xi);
    const bool in_u = task.unsafe.contains(xi);
    double vi = v[i];
    if (form.filtered && in_g) {
      vi = form.c1;
      v_raw[i] = false;
    } else if (form.filtered && in_u) {
      vi = form.c2;
      v_raw[i] = false;
    }
    v_eff[i] = vi;
    if (task.initial.contains(xi)) init_idx.push_back(i);
    const bool decrease_set = form.filtered ? (!in_g && !in_u) : !in_g;
    if (decrease_set && vi <= beta) dec_idx.push_back(i);
    if (!form.filtered && in_u) unsafe_idx.push_back(i);
  }

  if (!init_idx.empty()) {
    const double w = cfg.c_s / static_cast<double>(init_idx.size());
    double sum = 0.0;
    for (auto i : init_idx) {
      const double h = cfg.delta1 + v_eff[i] - beta;
      if (h > 0) {
        sum += h;
        if (v_raw[i]) p.adj_v[i] += w;
      }
    }
    p.terms.o_s = w * sum;
  }
  if (!dec_idx.empty()) {
    const double w = cfg.c_d / static_cast<double>(dec_idx.size());
    double sum = 0.0;
    for (auto i : dec_idx) {
      const Vec xni = xn.col(i);
      double vni = vn[i];
      bool raw_next = true;
      if (form.filtered) {
        if (task.goal.contains(xni)) {
          vni = form.c1;
          raw_next = false;
        } else if (task.unsafe.contains(xni)) {
          vni = form.c2;
          raw_next = false;
        }
      } else if (!task.domain.contains(xni)) {
        // Outside X the plain certificate is unconstrained; it is at least
        // alpha on X_U, so that stands in for V(x') and pushes V(x) above beta.
        vni = form.witness.alpha;
        raw_next = false;
      }
      const double h = cfg.delta2 + eps + vni - v_eff[i];
      if (h > 0) {
        sum += h;
        if (raw_next) p.adj_vnext[i] += w;
        if (v_raw[i]) p.adj_v[i] -= w;
      }
    }
    p.terms.o_d = w * sum;
  }
  if (!unsafe_idx.empty()) {
    const double w = cfg.c_u / static_cast<double>(unsafe_idx.size());
    double sum = 0.0;
    for (auto i : unsafe_idx) {
      const double h = cfg.delta1 + form.witness.alpha - v[i];
      if (h > 0) {
        sum += h;
        p.adj_v[i] -= w;
      }
    }
    p.terms.o_u = w * sum;
  }
  p.terms.n_initial = init_idx.size();
  p.terms.n_decrease = dec_idx.size();
  p.terms.n_unsafe = unsafe_idx.size();
  p.terms.total = p.terms.o_s + p.terms.o_d + p.terms.o_u;
  return p;
}

CertificateForm form_of(const FrwaCertificate& cert) {
  CertificateForm f;
  f.witness = cert.witness;
  f.c1 = cert.c1;
  f.c2 = cert.c2;
  f.filtered = true;
  return f;
}

}  // namespace

LossTerms loss_terms(const Dataset& data, const Mlp& certificate, const Mlp& controller,
                     const Plant& plant, const RwaTask& task, const CertificateForm& form,
                     const TrainConfig& cfg) {
  return run_pass(data, certificate, controller, plant, task, form, cfg).terms;
}

LossTerms loss_terms(const Dataset& data, const FrwaCertificate& cert, const Mlp& controller,
                     const SystemParams& params, const RwaTask& task, const TrainConfig& cfg) {
  if (!cert.net) throw PreconditionError("loss_terms: certificate has no network");
  return loss_terms(data, *cert.net, controller, spacecraft_plant(params), task, form_of(cert), cfg);
}

namespace {

std::vector<Eigen::Index> nonzero(const Vec& v) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) idx.push_back(i);
  }
  return idx;
}

Mat columns(const Mat& m, const std::vector<Eigen::Index>& idx) {
  Mat out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(idx[k]);
  return out;
}

RowVec entries(const Vec& v, const std::vector<Eigen::Index>& idx) {
  RowVec out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[idx[k]];
  return out;
}

}  // namespace

LossGradients loss_gradients(const Dataset& data, const Mlp& certificate, const Mlp& controller,
                             const Plant& plant, const RwaTask& task, const CertificateForm& form,
                             const TrainConfig& cfg) {
  const Pass p = run_pass(data, certificate, controller, plant, task, form, cfg);
  LossGradients out;
  out.terms = p.terms;
  out.certificate = GradientSet::zeros_like(certificate);
  out.controller = GradientSet::zeros_like(controller);
  // Only points with an active hinge contribute, so replay just those columns.
  const auto act = nonzero(p.adj_v);
  if (!act.empty()) {
    out.certificate += gradients(certificate, certificate.record(columns(p.x, act)), entries(p.adj_v, act)).grads;
  }
  const auto act_next = nonzero(p.adj_vnext);
  if (!act_next.empty()) {
    auto g = gradients(certificate, certificate.record(columns(p.xn, act_next)), entries(p.adj_vnext, act_next));
    out.certificate += g.grads;
    // dO/du = B^T dO/dx', zero where the clip saturates.
    const Mat du = (plant.step.b_matrix.transpose() * g.input_adjoint).cwiseProduct(columns(p.clip_mask, act_next));
    out.controller = gradients(controller, controller.record(columns(p.x, act_next)), du).grads;
  }
  return out;
}

// ---------------------------------------------------------------- training

std::string to_string(TrainOutcome::Status s) {
  switch (s) {
    case TrainOutcome::Status::Converged: return "converged";
    case TrainOutcome::Status::EpochLimit: return "epoch_limit";
    case TrainOutcome::Status::Diverged: return "diverged";
    case TrainOutcome::Status::OutOfTime: return "out_of_time";
  }
  return "epoch_limit";
}

namespace {

bool finite_grads(const GradientSet& g) {
  for (const auto& w : g.weights) {
    if (!w.allFinite()) return false;
  }
  for (const auto& b : g.biases) {
    if (!b.allFinite()) return false;
  }
  return true;
}

Dataset gather(const Dataset& data, const std::vector<std::size_t>& order, std::size_t from,
               std::size_t to) {
  Dataset b;
  for (std::size_t k = from; k < to; ++k) b.add(data.points[order[k]], data.tags[order[k]]);
  return b;
}

}  // namespace

TrainOutcome train_to_zero(const Mlp& certificate, const Mlp& controller, const Dataset& data,
                           const Plant& plant, const RwaTask& task, const CertificateForm& form,
                           const TrainConfig& cfg, double lr, bool joint, double deadline_s) {
  cfg.validate();
  if (!(lr > 0)) throw PreconditionError("train_to_zero: learning rate must be > 0");
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - start).count(); };

  TrainOutcome out;
  out.certificate = certificate;
  out.controller = controller;
  Optimizer opt_v(cfg.optimizer, certificate, cfg.momentum);
  Optimizer opt_u(cfg.optimizer, controller, cfg.momentum);

  const std::size_t n = data.size();
  const bool minibatch = cfg.batch_size > 0 && cfg.batch_size < n;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(cfg.seed, 0x7261696eULL));

  for (int epoch = 0;; ++epoch) {
    LossGradients g = loss_gradients(data, out.certificate, out.controller, plant, task, form, cfg);
    out.final_loss = g.terms.total;
    out.epochs = epoch;
    if (!std::isfinite(g.terms.total) || !finite_grads(g.certificate) || !finite_grads(g.controller)) {
      out.status = TrainOutcome::Status::Diverged;
      return out;
    }
    if (g.terms.total <= cfg.zero_loss_tol) {
      out.status = TrainOutcome::Status::Converged;
      return out;
    }
    if (epoch >= cfg.epochs_max) {
      out.status = TrainOutcome::Status::EpochLimit;
      return out;
    }
    if (deadline_s > 0 && elapsed() >= deadline_s) {
      out.status = TrainOutcome::Status::OutOfTime;
      return out;
    }
    Mlp next_v = out.certificate;
    Mlp next_u = out.controller;
    if (!minibatch) {
      opt_v.step(next_v, g.certificate, lr);
      if (joint) opt_u.step(next_u, g.controller, lr);
    } else {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t from = 0; from < n; from += cfg.batch_size) {
        const Dataset batch = gather(data, order, from, std::min(n, from + cfg.batch_size));
        LossGradients gb = loss_gradients(batch, next_v, next_u, plant, task, form, cfg);
        if (!finite_grads(gb.certificate) || !finite_grads(gb.controller)) break;
        opt_v.step(next_v, gb.certificate, lr);
        if (joint) opt_u.step(next_u, gb.controller, lr);
      }
    }
    if (!next_v.finite() || !next_u.finite()) {
      // Keep the last finite parameters so callers still hold usable networks.
      out.status = TrainOutcome::Status::Diverged;
      out.epochs = epoch + 1;
      return out;
    }
    out.certificate = std::move(next_v);
    out.controller = std::move(next_u);
  }
}

// ---------------------------------------------------------------- data

Dataset augment(const Dataset& data, const std::vector<Vec>& counterexamples, const RwaTask& task,
                const TrainConfig& cfg, std::uint64_t seed, const std::optional<BoxRegion>& within,
                bool allow_unsafe) {
  Dataset out = data;
  for (std::size_t k = 0; k < counterexamples.size(); ++k) {
    const Vec& c = counterexamples[k];
    if (c.size() != task.domain.dim()) throw ShapeError("augment: counterexample has the wrong dimension");
    if (legal_training_point(task, c, allow_unsafe)) out.add(c, Provenance::CounterexampleNeighborhood);
    Vec lo = (c.array() - cfg.neighbor_radius).matrix();
    Vec hi = (c.array() + cfg.neighbor_radius).matrix();
    lo = lo.cwiseMax(task.domain.lower);
    hi = hi.cwiseMin(task.domain.upper);
    if (within) {
      lo = lo.cwiseMax(within->lower);
      hi = hi.cwiseMin(within->upper);
    }
    if ((lo.array() > hi.array()).any()) continue;
    Rng rng(mix_seed(seed, k));
    for (int j = 0; j < cfg.neighbor_count; ++j) {
      Vec x = uniform_in_box(rng, lo, hi);
      if (legal_training_point(task, x, allow_unsafe)) out.add(std::move(x), Provenance::CounterexampleNeighborhood);
    }
  }
  return out;
}

Dataset base_dataset(const RwaTask& task, const TrainConfig& cfg, std::uint64_t seed,
                     bool include_unsafe) {
  Dataset out;
  const Region free = Region::intersection_of({Region::complement(task.unsafe), Region::complement(task.goal)})
                          .with_label("X \\ (X_U u X_G)");
  for (auto& x : sample_region(free, task.domain, cfg.base_samples, mix_seed(seed, 1))) {
    out.add(std::move(x), Provenance::Sampled);
  }
  for (auto& x : sample_region(task.initial, task.domain, cfg.base_initial_samples, mix_seed(seed, 2))) {
    out.add(std::move(x), Provenance::Sampled);
  }
  if (include_unsafe && cfg.base_unsafe_samples > 0) {
    for (auto& x : sample_region(task.unsafe, task.domain, cfg.base_unsafe_samples, mix_seed(seed, 3))) {
      out.add(std::move(x), Provenance::Sampled);
    }
  }
  return out;
}

// ---------------------------------------------------------------- initial controller

std::string to_string(InitMode m) {
  switch (m) {
    case InitMode::Import: return "import";
    case InitMode::RegressToBaseline: return "regress_to_baseline";
    case InitMode::Random: return "random";
  }
  return "random";
}

InitMode init_mode_from_string(const std::string& s) {
  if (s == "import") return InitMode::Import;
  if (s == "regress_to_baseline") return InitMode::RegressToBaseline;
  if (s == "random") return InitMode::Random;
  throw ParseError("unknown init mode '" + s + "'");
}

Vec baseline_law(const Plant& plant, const Vec& s, const BaselineGains& gains) {
  if (s.size() != plant.state_dim()) throw ShapeError("baseline_law: state has the wrong dimension");
  if (plant.position_dims.size() != static_cast<std::size_t>(plant.input_dim()) ||
      plant.velocity_dims.size() != plant.position_dims.size()) {
    throw PreconditionError("baseline_law: needs one position/velocity pair per input");
  }
  Vec u(plant.input_dim());
  for (int j = 0; j < plant.input_dim(); ++j) {
    u[j] = -gains.kp * s[plant.position_dims[j]] - gains.kd * s[plant.velocity_dims[j]];
  }
  return clip_thrust(u, plant.thrust_limit);
}

namespace {

Mat baseline_targets(const Plant& plant, const Mat& x, const BaselineGains& gains) {
  Mat y(plant.input_dim(), x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) y.col(i) = baseline_law(plant, x.col(i), gains);
  return y;
}

Mat domain_samples(const RwaTask& task, std::size_t count, std::uint64_t seed) {
  if (!task.domain.is_finite()) throw PreconditionError("controller fitting needs a finite domain");
  Rng rng(seed);
  Mat x(task.domain.dim(), static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < x.cols(); ++i) x.col(i) = uniform_in_box(rng, task.domain.lower, task.domain.upper);
  return x;
}

}  // namespace

Mlp initial_controller(const Plant& plant, const RwaTask& task, const InitOptions& options,
                       std::uint64_t seed) {
  std::vector<int> sizes{plant.state_dim()};
  sizes.insert(sizes.end(), options.hidden.begin(), options.hidden.end());
  sizes.push_back(plant.input_dim());
  switch (options.mode) {
    case InitMode::Import: {
      Mlp net = load(options.import_path);
      if (net.input_dim() != plant.state_dim() || net.output_dim() != plant.input_dim()) {
        throw ShapeError("imported controller '" + options.import_path + "' does not match the plant");
      }
      return net;
    }
    case InitMode::Random: return init(sizes, seed);
    case InitMode::RegressToBaseline: break;
  }
  Mlp net = init(sizes, seed);
  const Mat x = domain_samples(task, options.samples, mix_seed(seed, 11));
  const Mat y = baseline_targets(plant, x, options.gains);
  Optimizer opt(OptimizerKind::Adam, net);
  const double n = static_cast<double>(x.cols()) * plant.input_dim();
  for (int e = 0; e < options.epochs; ++e) {
    const ForwardTape tape = net.record(x);
    const Mat adj = (2.0 / n) * (tape.output() - y);
    // Step size decays so the fit settles instead of rattling around the optimum.
    const double lr = 1e-2 / (1.0 + 5.0 * e / std::max(1, options.epochs));
    opt.step(net, gradients(net, tape, adj).grads, lr);
  }
  return net;
}

double baseline_residual(const Mlp& controller, const Plant& plant, const RwaTask& task,
                         const BaselineGains& gains, std::size_t samples, std::uint64_t seed) {
  const Mat x = domain_samples(task, samples, seed);
  const Mat diff = controller.forward_batch(x) - baseline_targets(plant, x, gains);
  return std::sqrt(diff.squaredNorm() / static_cast<double>(diff.size()));
}

}  // namespace nlb
