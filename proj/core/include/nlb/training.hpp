#pragma once

/// @file training.hpp
/// Certificate losses, dataset handling, controller initialization and the
/// counterexample-guided training loop.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nlb/certificate.hpp"
#include "nlb/dynamics.hpp"
#include "nlb/nn.hpp"
#include "nlb/verifier.hpp"

namespace nlb {

/// Two readings of the margin pair written as "1e-4 - 1e-5" / "1e-4 - 1e-7".
enum class DeltaReading : std::uint8_t {
  Difference,  ///< delta1 = 9e-5, delta2 = 9.99e-5
  Range,       ///< the upper end of each range: delta1 = delta2 = 1e-4
};
std::pair<double, double> margins_for(DeltaReading reading);
std::string to_string(DeltaReading r);
DeltaReading delta_reading_from_string(const std::string& s);

struct TrainConfig {
  double c_s = 1.0;
  double c_d = 10.0;
  double c_u = 1.0;  ///< unsafe-set weight, plain (unfiltered) mode only
  DeltaReading delta_reading = DeltaReading::Difference;
  double delta1 = 1e-4 - 1e-5;
  double delta2 = 1e-4 - 1e-7;
  double lr_initial = 5e-3;   ///< until the first round that reaches zero loss
  double lr_finetune = 1e-4;
  int epochs_max = 5000;
  std::size_t batch_size = 0;  ///< 0 = full dataset
  double zero_loss_tol = 0.0;
  int neighbor_count = 100;
  double neighbor_radius = 0.05;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double momentum = 0.9;
  bool joint = true;
  std::size_t base_samples = 20000;         ///< uniform over X \ (X_U u X_G)
  std::size_t base_initial_samples = 2000;  ///< uniform over X_I
  std::size_t base_unsafe_samples = 2000;   ///< uniform over X_U in X, plain mode only
  std::vector<int> controller_hidden{20, 20};
  std::vector<int> certificate_hidden{30, 30};
  std::size_t counterexamples_per_check = 8;

  /// Throws PreconditionError on negative weights or non-positive margins/rates.
  void validate() const;
};

enum class Provenance : std::uint8_t { Sampled, CounterexampleNeighborhood };

struct Dataset {
  std::vector<Vec> points;
  std::vector<Provenance> tags;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void add(Vec p, Provenance tag);
};

/// (X \ (X_U u X_G)) u X_I: the only points the filtered losses look at.
/// Plain mode also admits X_U points inside X.
bool legal_training_point(const RwaTask& task, const Vec& x, bool allow_unsafe = false);

/// Which certificate the losses train: filtered (c1/c2 wrapper) or plain.
struct CertificateForm {
  Witness witness;
  double c1 = -10.0;
  double c2 = 1.2;
  bool filtered = true;
};

struct LossTerms {
  double o_s = 0.0;
  double o_d = 0.0;
  double o_u = 0.0;  ///< plain mode only
  double total = 0.0;
  std::size_t n_initial = 0;
  std::size_t n_decrease = 0;
  std::size_t n_unsafe = 0;
};

struct LossGradients {
  LossTerms terms;
  GradientSet certificate;
  GradientSet controller;
};

/// O_s over points in X_I, O_d over points outside X_U u X_G whose current
/// V is at most beta (membership is not differentiated), O = O_s + O_d.
/// An empty index set makes its term 0.
LossTerms loss_terms(const Dataset& data, const Mlp& certificate, const Mlp& controller,
                     const Plant& plant, const RwaTask& task, const CertificateForm& form,
                     const TrainConfig& cfg);
LossTerms loss_terms(const Dataset& data, const FrwaCertificate& cert, const Mlp& controller,
                     const SystemParams& params, const RwaTask& task, const TrainConfig& cfg);

/// Loss and exact gradients for both networks (through the plant and clip).
LossGradients loss_gradients(const Dataset& data, const Mlp& certificate, const Mlp& controller,
                             const Plant& plant, const RwaTask& task, const CertificateForm& form,
                             const TrainConfig& cfg);

struct TrainOutcome {
  enum class Status : std::uint8_t { Converged, EpochLimit, Diverged, OutOfTime };
  Status status = Status::EpochLimit;
  Mlp certificate;
  Mlp controller;
  double final_loss = 0.0;
  int epochs = 0;
};
std::string to_string(TrainOutcome::Status s);

/// Gradient descent on O until O <= zero_loss_tol or epochs_max.
TrainOutcome train_to_zero(const Mlp& certificate, const Mlp& controller, const Dataset& data,
                           const Plant& plant, const RwaTask& task, const CertificateForm& form,
                           const TrainConfig& cfg, double lr, bool joint,
                           double deadline_s = 0.0);

/// Adds each counterexample plus neighbor_count uniform samples of its L-inf
/// ball, keeping only legal points. If `within` is given, neighbors are
/// drawn from the ball intersected with that box.
Dataset augment(const Dataset& data, const std::vector<Vec>& counterexamples,
                const RwaTask& task, const TrainConfig& cfg, std::uint64_t seed,
                const std::optional<BoxRegion>& within = std::nullopt, bool allow_unsafe = false);

/// Base dataset: uniform samples of X \ (X_U u X_G) and of X_I (plus X_U
/// when include_unsafe).
Dataset base_dataset(const RwaTask& task, const TrainConfig& cfg, std::uint64_t seed,
                     bool include_unsafe = false);

enum class InitMode : std::uint8_t { Import, RegressToBaseline, Random };
std::string to_string(InitMode m);
InitMode init_mode_from_string(const std::string& s);

struct BaselineGains {
  double kp = 0.2;
  double kd = 3.0;
};

/// u = clip(-kp * position - kd * velocity) per input axis.
Vec baseline_law(const Plant& plant, const Vec& s, const BaselineGains& gains = {});

struct InitOptions {
  InitMode mode = InitMode::RegressToBaseline;
  std::string import_path;
  BaselineGains gains;
  std::vector<int> hidden{20, 20};
  std::size_t samples = 4000;
  int epochs = 3000;
};

Mlp initial_controller(const Plant& plant, const RwaTask& task, const InitOptions& options,
                       std::uint64_t seed);

/// RMS of (net - baseline law) over samples of the domain.
double baseline_residual(const Mlp& controller, const Plant& plant, const RwaTask& task,
                         const BaselineGains& gains, std::size_t samples, std::uint64_t seed);

// ---------------------------------------------------------------- CEGIS

struct CegisLogRow {
  int iteration = 0;
  double loss = 0.0;
  int epochs = 0;
  std::string train_status;
  std::size_t dataset_size = 0;
  std::vector<std::string> verdicts;  ///< one per condition check, in order
  std::vector<Vec> counterexamples;   ///< first point per failing check
  std::vector<bool> pseudo;           ///< counterexample came from an Unknown box
};

struct CegisOptions {
  CertificateForm form;
  TrainConfig train;
  BnbConfig verifier;
  double wall_budget_s = 3600.0;
  int max_iterations = 1000;
  std::optional<Mlp> initial_controller;   ///< default: regress to baseline
  std::optional<Mlp> initial_certificate;  ///< default: init() with the train seed
  std::optional<Dataset> initial_data;     ///< default: base_dataset
  /// Optional per-iteration callback (for logging).
  std::function<void(const CegisLogRow&)> on_iteration;
};

struct CegisResult {
  enum class Status : std::uint8_t { Verified, TimedOut };
  Status status = Status::TimedOut;
  Mlp controller;
  FrwaCertificate certificate;        ///< filtered form (also holds the net in plain mode)
  std::optional<RwaCertificate> plain;  ///< set in plain mode
  int iterations = 0;
  double wall_time = 0.0;
  std::string note;
  std::vector<CegisLogRow> log;
  Dataset data;
};
std::string to_string(CegisResult::Status s);

CegisResult cegis(const Plant& plant, const RwaTask& task, const CegisOptions& options);
CegisResult cegis(const RwaTask& task, const SystemParams& params, const CegisOptions& options);

/// CSV with header iteration,loss,epochs,train_status,dataset_size,verdicts,counterexamples.
std::string cegis_log_csv(const std::vector<CegisLogRow>& rows);

}  // namespace nlb
