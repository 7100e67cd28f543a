#include <chrono>
#include <sstream>

#include "nlb/conditions.hpp"
#include "nlb/error.hpp"
#include "nlb/rng.hpp"
#include "nlb/training.hpp"

namespace nlb {

std::string to_string(CegisResult::Status s) {
  return s == CegisResult::Status::Verified ? "verified" : "timed_out";
}

namespace {

struct Check {
  std::string name;
  Verdict verdict;
};

std::optional<BoxRegion> single_box(const Region& r, const BoxRegion& domain) {
  const auto cover = box_cover(r, domain);
  if (cover.size() == 1) return cover.front();
  return std::nullopt;
}

}  // namespace

CegisResult cegis(const Plant& plant, const RwaTask& task, const CegisOptions& options) {
  options.train.validate();
  options.form.witness.validate();
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - start).count(); };
  auto remaining = [&] { return options.wall_budget_s - elapsed(); };

  const TrainConfig& tc = options.train;
  const bool filtered = options.form.filtered;

  CegisResult res;
  if (options.initial_controller) {
    res.controller = *options.initial_controller;
  } else {
    InitOptions io;
    io.hidden = tc.controller_hidden;
    res.controller = initial_controller(plant, task, io, mix_seed(tc.seed, 21));
  }
  Mlp cert_net;
  if (options.initial_certificate) {
    cert_net = *options.initial_certificate;
  } else {
    std::vector<int> sizes{plant.state_dim()};
    sizes.insert(sizes.end(), tc.certificate_hidden.begin(), tc.certificate_hidden.end());
    sizes.push_back(1);
    cert_net = init(sizes, mix_seed(tc.seed, 22));
  }
  res.data = options.initial_data ? *options.initial_data : base_dataset(task, tc, mix_seed(tc.seed, 23), !filtered);

  BnbConfig vcfg = with_plant_widths(options.verifier, plant);
  vcfg.max_counterexamples = std::max<std::size_t>(1, tc.counterexamples_per_check);
  const auto initial_box = single_box(task.initial, task.domain);

  auto make_frwa = [&](const Mlp& net) {
    FrwaCertificate c;
    c.net = std::make_shared<const Mlp>(net);
    c.witness = options.form.witness;
    c.goal = task.goal;
    c.unsafe = task.unsafe;
    c.c1 = options.form.c1;
    c.c2 = options.form.c2;
    return c;
  };

  // The first network is trained at lr_initial until it first reaches zero
  // loss, which may take several epoch-capped rounds; later rounds fine-tune.
  bool first_network_done = false;
  bool last_only_unknown = false;
  for (int it = 0;; ++it) {
    if (it >= options.max_iterations) {
      res.note = "iteration limit reached";
      break;
    }
    if (remaining() <= 0) {
      res.note = "wall-clock budget exhausted";
      break;
    }
    CegisLogRow row;
    row.iteration = it;
    const double lr = first_network_done ? tc.lr_finetune : tc.lr_initial;
    TrainOutcome tr = train_to_zero(cert_net, res.controller, res.data, plant, task, options.form, tc,
                                    lr, tc.joint, std::max(remaining(), 1e-3));
    first_network_done = first_network_done || tr.status == TrainOutcome::Status::Converged;
    cert_net = std::move(tr.certificate);
    res.controller = std::move(tr.controller);
    row.loss = tr.final_loss;
    row.epochs = tr.epochs;
    row.train_status = to_string(tr.status);
    row.dataset_size = res.data.size();
    res.iterations = it + 1;
    res.certificate = make_frwa(cert_net);

    if (tr.status == TrainOutcome::Status::Diverged) {
      res.note = "training diverged at iteration " + std::to_string(it);
      res.log.push_back(row);
      if (options.on_iteration) options.on_iteration(row);
      break;
    }

    std::vector<Check> checks;
    auto run = [&](const std::string& name, auto&& fn) {
      BnbConfig c = vcfg;
      const double left = remaining();
      if (left <= 0) return false;
      c.time_budget_s = options.verifier.time_budget_s > 0 ? std::min(options.verifier.time_budget_s, left) : left;
      c.seed = mix_seed(vcfg.seed, static_cast<std::uint64_t>(it));
      checks.push_back({name, fn(c)});
      return true;
    };
    bool complete = true;
    if (filtered) {
      const FrwaCertificate& fc = res.certificate;
      complete = complete && run("condition1", [&](const BnbConfig& c) { return check_condition1(fc, task, c); });
      complete = complete && run("condition2", [&](const BnbConfig& c) {
        return check_condition2_filtered(fc, res.controller, plant, task, c);
      });
    } else {
      RwaCertificate rc;
      rc.net = res.certificate.net;
      rc.witness = options.form.witness;
      res.plain = rc;
      complete = complete && run("condition1", [&](const BnbConfig& c) { return check_condition1(rc, task, c); });
      complete = complete && run("condition2", [&](const BnbConfig& c) {
        return check_condition2(rc, res.controller, plant, task, c);
      });
      complete = complete && run("condition3", [&](const BnbConfig& c) { return check_condition3(rc, task, c); });
    }

    bool all_verified = complete;
    bool only_unknown = true;
    std::vector<Vec> cex_initial, cex_other;
    for (const auto& ch : checks) {
      row.verdicts.push_back(ch.name + ":" + to_string(ch.verdict.kind));
      const Verdict& v = ch.verdict;
      if (v.verified()) continue;
      all_verified = false;
      only_unknown = only_unknown && v.kind == Verdict::Kind::Unknown;
      std::vector<Vec> pts;
      bool pseudo = false;
      if (v.has_counterexample()) {
        pts = v.counterexamples.empty() ? std::vector<Vec>{v.counterexample} : v.counterexamples;
      } else if (v.unresolved_center.size() > 0) {
        pts = {v.unresolved_center};
        pseudo = true;
      }
      if (pts.empty()) continue;
      row.counterexamples.push_back(pts.front());
      row.pseudo.push_back(pseudo);
      auto& dst = ch.name == "condition1" ? cex_initial : cex_other;
      dst.insert(dst.end(), pts.begin(), pts.end());
    }
    res.log.push_back(row);
    if (options.on_iteration) options.on_iteration(row);

    if (all_verified) {
      res.status = CegisResult::Status::Verified;
      break;
    }
    if (!complete) {
      res.note = "wall-clock budget exhausted during verification";
      break;
    }
    // Zero training epochs leave the networks unchanged, so another round
    // would only re-run the checks that were already unresolved.
    if (only_unknown && last_only_unknown && tr.epochs == 0) {
      res.note = "stalled: verifier unresolved on networks the training set already satisfies";
      break;
    }
    last_only_unknown = only_unknown;
    const std::uint64_t s = mix_seed(tc.seed, 1000 + static_cast<std::uint64_t>(it));
    res.data = augment(res.data, cex_initial, task, tc, mix_seed(s, 1), initial_box, !filtered);
    res.data = augment(res.data, cex_other, task, tc, mix_seed(s, 2), std::nullopt, !filtered);
  }
  res.wall_time = elapsed();
  return res;
}

CegisResult cegis(const RwaTask& task, const SystemParams& params, const CegisOptions& options) {
  return cegis(spacecraft_plant(params), task, options);
}

std::string cegis_log_csv(const std::vector<CegisLogRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "iteration,loss,epochs,train_status,dataset_size,verdicts,counterexamples\n";
  for (const auto& r : rows) {
    os << r.iteration << ',' << r.loss << ',' << r.epochs << ',' << r.train_status << ','
       << r.dataset_size << ',';
    for (std::size_t i = 0; i < r.verdicts.size(); ++i) os << (i ? ";" : "") << r.verdicts[i];
    os << ',';
    for (std::size_t i = 0; i < r.counterexamples.size(); ++i) {
      if (i) os << ';';
      if (i < r.pseudo.size() && r.pseudo[i]) os << '*';
      const Vec& c = r.counterexamples[i];
      for (Eigen::Index k = 0; k < c.size(); ++k) os << (k ? " " : "") << c[k];
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace nlb
