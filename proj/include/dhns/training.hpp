#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dhns/adam.hpp"
#include "dhns/checkpoint.hpp"
#include "dhns/diffusion.hpp"
#include "dhns/evaluation.hpp"
#include "dhns/kg.hpp"
#include "dhns/kge.hpp"
#include "dhns/negatives.hpp"

namespace dhns {

enum class SamplerKind { uniform, bernoulli };

struct Ablation {
  bool no_mmc = false;      // zero condition for the denoiser
  bool no_mhld = false;     // single harvest step {T/2}
  bool no_ntat = false;     // lambda forced to 0
  bool no_hal = false;      // every generated margin replaced by gamma
  bool no_diffheg = false;  // no diffusion training, no generated negatives
};

struct TrainConfig {
  ModelKind model = ModelKind::rotation;
  int dim = 32;
  int diffusion_steps = 100;
  std::vector<int> steps;  // empty: {T/20, T/10, T/5, T/2}
  double gamma = 4.0;
  double gamma_min = 2.0;
  double gamma_max = 6.0;
  double lambda = 1.0;
  int negatives = 16;
  int batch_size = 128;
  int epochs = 50;
  double lr_kge = 0.1;
  double lr_diff = 2e-3;
  std::uint64_t seed = 0;
  SamplerKind sampler = SamplerKind::uniform;
  Ablation ablation;
  ReverseOptions reverse;
  bool joint_score_sampled = false;
  // Score the positive of the hardness-adaptive loss by the mean modality
  // energy, like the generated negatives it is contrasted with.
  bool joint_score_positive = true;
  bool eval_joint = false;
  int threads = 1;

  void validate() const;
  std::vector<int> effective_steps() const;
  double effective_lambda() const;
  bool trains_diffusion() const { return !ablation.no_diffheg; }
  // Generated negatives are only produced when they reach the loss.
  bool uses_generated() const { return trains_diffusion() && effective_lambda() > 0.0; }
};

// Reverse-chain settings implied by a config (steps, margins, condition,
// reverse formula). no_hal is applied to the bundles afterwards.
GenerationOptions generation_options(const TrainConfig& cfg);

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message);
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Unknown keys are rejected; missing keys keep their defaults.
TrainConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& cfg);

// -log(sigmoid(x)), computed without overflow.
double neg_log_sigmoid(double x);

// A scored negative for the hardness-adaptive loss.
struct ScoredNegative {
  double score = 0.0;
  double weight = 1.0;
  double margin = 0.0;
};

// -log s(margin_pos - E_pos) - (1/|G|) sum_g w_g log s(S_g - margin_g)
double hardness_adaptive_loss_from_scores(double positive_energy, double positive_margin,
                                          std::span<const ScoredNegative> negatives);

// -log s(gamma - E_pos) - (1/|S|) sum_s log s(S_s - gamma)
double kgc_loss_from_scores(double positive_energy, std::span<const double> negative_scores,
                            double gamma);

double total_loss(double kgc, double ha, double lambda);

// Mean of the three modality energies of a generated negative, the observed
// entity's modality embeddings taken from the space.
double joint_score(const EmbeddingSpace& space, const Triple& positive, Side side,
                   const GeneratedNegative& negative);

// Loss of one side's bundle; the positive term uses the bundle's
// weight-averaged margin and the structural energy, or the mean modality
// energy when joint_positive is set. When `grads` is given,
// scale * dL/dparams is added to it. Generated embeddings are constants.
double hardness_adaptive_loss(const EmbeddingSpace& space, const NegativeBundle& bundle,
                              bool joint_positive = false, double scale = 1.0,
                              EmbeddingSpace* grads = nullptr);

// Sampled negatives are scored by the structural energy, or by the mean
// modality energy when joint_sampled is set.
double kgc_loss(const EmbeddingSpace& space, const SampledNegatives& sampled, double gamma,
                bool joint_sampled = false, double scale = 1.0, EmbeddingSpace* grads = nullptr);

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;  // mean over positives of L_KGC + lambda * L_HA
  double kgc = 0.0;
  double ha = 0.0;    // 0 when generated negatives are not used
  double diff = 0.0;  // mean over batches; 0 when diffusion is disabled
};

struct TrainReport {
  std::vector<EpochLog> epochs;
  double wall_seconds = 0.0;
  std::optional<EvalResult> final_metrics;
};

// Wall time is left out so reports of identical runs are byte-identical.
nlohmann::json to_json(const TrainReport& r);

class TrainingError : public Error {
 public:
  using Error::Error;
};

struct BatchStats {
  double loss = 0.0;
  double kgc = 0.0;
  double ha = 0.0;
};

// Both corruption sides of one positive.
using BundlePair = std::array<NegativeBundle, 2>;  // [head, tail]

class Trainer {
 public:
  Trainer(const Mmkg& kg, TrainConfig cfg);

  const TrainConfig& config() const { return cfg_; }
  const EmbeddingSpace& space() const { return space_; }
  const Denoiser& denoiser() const { return denoiser_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  EmbeddingSpace& mutable_space() { return space_; }

  // Phase 1: one Adam step on the denoiser against the current (detached)
  // embeddings of the batch, both generation directions. Returns L_diff.
  double diffusion_phase(std::span<const Triple> batch);

  // Phase 2: reverse chains for both sides of every positive. `stream_tag`
  // keys the noise; `first_index` offsets per-triple substreams.
  std::vector<BundlePair> generation_phase(std::span<const Triple> batch, std::uint64_t stream_tag,
                                           std::uint64_t first_index = 0) const;

  // Phase 3: one Adam step on the KGE parameters over L_KGC + lambda * L_HA.
  BatchStats kge_phase(std::span<const Triple> batch, std::span<const BundlePair> bundles);

  EpochLog run_epoch();
  TrainReport run();

  GenerationOptions generation_options() const;
  Checkpoint checkpoint() const;

 private:
  const Mmkg& kg_;
  TrainConfig cfg_;
  std::optional<BernoulliStats> bernoulli_;
  NoiseSchedule schedule_;
  EmbeddingSpace space_;
  Denoiser denoiser_;
  AdamState kge_adam_;
  AdamState diff_adam_;
  Rng shuffle_rng_;
  Rng sampler_rng_;
  Rng diffusion_rng_;
  Rng generation_root_;
  std::vector<std::size_t> order_;
  int epoch_ = 0;
};

struct TrainResult {
  EmbeddingSpace space;
  Denoiser denoiser;
  TrainReport report;
};

TrainResult train(const Mmkg& kg, const TrainConfig& cfg);

// Plain margin-loss trainer over sampled negatives only: the reference
// against which lambda = 0 runs must agree bit for bit.
TrainResult train_baseline(const Mmkg& kg, const TrainConfig& cfg);

// Model restored from a checkpoint written by Trainer::checkpoint().
struct LoadedModel {
  TrainConfig config;
  EmbeddingSpace space;
  Denoiser denoiser;
};

LoadedModel load_model(const Checkpoint& ckpt, const Mmkg& kg);

// Config, sizes and every parameter tensor; what Trainer::checkpoint() writes.
Checkpoint make_checkpoint(const TrainConfig& cfg, const Mmkg& kg, const EmbeddingSpace& space,
                           const Denoiser& denoiser);

}  // namespace dhns
