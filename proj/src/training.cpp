#include "dhns/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "dhns/parallel.hpp"

namespace dhns {

using nlohmann::json;

namespace {

enum StreamTag : std::uint64_t {
  kInitEmbeddings = 1,
  kInitDenoiser = 2,
  kShuffle = 3,
  kSampler = 4,
  kDiffusion = 5,
  kGeneration = 6,
};

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

SampledNegatives draw_negatives(const TrainConfig& cfg, const std::optional<BernoulliStats>& stats,
                                std::int32_t num_entities, const Triple& positive, Rng& rng) {
  if (cfg.sampler == SamplerKind::bernoulli)
    return sample_bernoulli(num_entities, *stats, positive, cfg.negatives, rng);
  const Side side = rng.uniform() < 0.5 ? Side::head : Side::tail;
  return sample_uniform(num_entities, positive, side, cfg.negatives, rng);
}

void shuffle(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
}

void check_finite(double value, const char* what, int epoch, std::size_t batch) {
  if (!std::isfinite(value)) {
    std::ostringstream msg;
    msg << "non-finite " << what << " (" << value << ") at epoch " << epoch << ", batch " << batch;
    throw TrainingError(msg.str());
  }
}

// Gradient of E(a, r, b) pushed into the entity/relation parameters.
void accumulate_energy(const EmbeddingSpace& space, EmbeddingSpace& grads, const EnergyGradient& g,
                       double coef, EntityId head, Modality head_m, RelationId relation,
                       EntityId tail, Modality tail_m, bool head_is_param, bool tail_is_param) {
  if (head_is_param) grads.accumulate_entity(space, head, head_m, coef * g.head);
  grads.accumulate_relation(space, relation, coef * g.relation);
  if (tail_is_param) grads.accumulate_entity(space, tail, tail_m, coef * g.tail);
}

}  // namespace

// ---------------------------------------------------------------- config

ConfigError::ConfigError(std::string field, const std::string& message)
    : Error("config field '" + field + "': " + message), field_(std::move(field)) {}

void TrainConfig::validate() const {
  if (dim < 2 || dim % 2 != 0) throw ConfigError("dim", "must be a positive even integer");
  if (diffusion_steps < 2) throw ConfigError("diffusion_steps", "must be at least 2");
  for (int t : steps)
    if (t < 1 || t > diffusion_steps)
      throw ConfigError("steps", "every step must lie in [1, diffusion_steps]");
  if (!(gamma > 0.0)) throw ConfigError("gamma", "must be positive");
  if (!(gamma_min > 0.0)) throw ConfigError("gamma_min", "must be positive");
  if (!(gamma_max > gamma_min)) throw ConfigError("gamma_max", "must exceed gamma_min");
  if (!(lambda >= 0.0)) throw ConfigError("lambda", "must be non-negative");
  if (negatives < 1) throw ConfigError("negatives", "must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size", "must be at least 1");
  if (epochs < 0) throw ConfigError("epochs", "must be non-negative");
  if (!(lr_kge > 0.0)) throw ConfigError("lr_kge", "must be positive");
  if (!(lr_diff > 0.0)) throw ConfigError("lr_diff", "must be positive");
  if (threads < 0) throw ConfigError("threads", "must be non-negative");
}

std::vector<int> TrainConfig::effective_steps() const {
  if (ablation.no_mhld) return default_steps(diffusion_steps, false);
  if (steps.empty()) return default_steps(diffusion_steps, true);
  std::vector<int> s = steps;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

double TrainConfig::effective_lambda() const {
  return ablation.no_ntat || ablation.no_diffheg ? 0.0 : lambda;
}

namespace {

template <typename T>
T read_field(const json& j, const std::string& key, const char* expected) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key, std::string("expected ") + expected);
  }
}

double read_number(const json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError(key, "expected a number");
  return j.get<double>();
}

int read_int(const json& j, const std::string& key) {
  if (!j.is_number_integer()) throw ConfigError(key, "expected an integer");
  return j.get<int>();
}

bool read_bool(const json& j, const std::string& key) {
  if (!j.is_boolean()) throw ConfigError(key, "expected true or false");
  return j.get<bool>();
}

}  // namespace

TrainConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "expected a JSON object");
  TrainConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "model") {
      const auto name = read_field<std::string>(value, key, "a string");
      try {
        c.model = parse_model_kind(name);
      } catch (const Error&) {
        throw ConfigError(key, "expected one of translation, bilinear, rotation");
      }
    } else if (key == "dim") {
      c.dim = read_int(value, key);
    } else if (key == "diffusion_steps") {
      c.diffusion_steps = read_int(value, key);
    } else if (key == "steps") {
      if (!value.is_array()) throw ConfigError(key, "expected an array of integers");
      c.steps.clear();
      for (const auto& v : value) c.steps.push_back(read_int(v, key));
    } else if (key == "gamma") {
      c.gamma = read_number(value, key);
    } else if (key == "gamma_min") {
      c.gamma_min = read_number(value, key);
    } else if (key == "gamma_max") {
      c.gamma_max = read_number(value, key);
    } else if (key == "lambda") {
      c.lambda = read_number(value, key);
    } else if (key == "negatives") {
      c.negatives = read_int(value, key);
    } else if (key == "batch_size") {
      c.batch_size = read_int(value, key);
    } else if (key == "epochs") {
      c.epochs = read_int(value, key);
    } else if (key == "lr_kge") {
      c.lr_kge = read_number(value, key);
    } else if (key == "lr_diff") {
      c.lr_diff = read_number(value, key);
    } else if (key == "seed") {
      if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<std::int64_t>() >= 0))
        throw ConfigError(key, "expected a non-negative integer");
      c.seed = value.get<std::uint64_t>();
    } else if (key == "sampler") {
      const auto name = read_field<std::string>(value, key, "a string");
      if (name == "uniform")
        c.sampler = SamplerKind::uniform;
      else if (name == "bernoulli")
        c.sampler = SamplerKind::bernoulli;
      else
        throw ConfigError(key, "expected uniform or bernoulli");
    } else if (key == "ablation") {
      if (!value.is_object()) throw ConfigError(key, "expected an object");
      for (const auto& [flag, v] : value.items()) {
        const std::string name = "ablation." + flag;
        if (flag == "no_mmc") c.ablation.no_mmc = read_bool(v, name);
        else if (flag == "no_mhld") c.ablation.no_mhld = read_bool(v, name);
        else if (flag == "no_ntat") c.ablation.no_ntat = read_bool(v, name);
        else if (flag == "no_hal") c.ablation.no_hal = read_bool(v, name);
        else if (flag == "no_diffheg") c.ablation.no_diffheg = read_bool(v, name);
        else throw ConfigError(name, "unknown ablation flag");
      }
    } else if (key == "paper_literal_reverse") {
      c.reverse.paper_literal_reverse = read_bool(value, key);
    } else if (key == "paper_literal_sigma") {
      c.reverse.paper_literal_sigma = read_bool(value, key);
    } else if (key == "joint_score_sampled") {
      c.joint_score_sampled = read_bool(value, key);
    } else if (key == "joint_score_positive") {
      c.joint_score_positive = read_bool(value, key);
    } else if (key == "eval_joint") {
      c.eval_joint = read_bool(value, key);
    } else if (key == "threads") {
      c.threads = read_int(value, key);
    } else {
      throw ConfigError(key, "unknown field");
    }
  }
  c.validate();
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"model", to_string(c.model)},
          {"dim", c.dim},
          {"diffusion_steps", c.diffusion_steps},
          {"steps", c.steps},
          {"gamma", c.gamma},
          {"gamma_min", c.gamma_min},
          {"gamma_max", c.gamma_max},
          {"lambda", c.lambda},
          {"negatives", c.negatives},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"lr_kge", c.lr_kge},
          {"lr_diff", c.lr_diff},
          {"seed", c.seed},
          {"sampler", c.sampler == SamplerKind::uniform ? "uniform" : "bernoulli"},
          {"ablation",
           {{"no_mmc", c.ablation.no_mmc},
            {"no_mhld", c.ablation.no_mhld},
            {"no_ntat", c.ablation.no_ntat},
            {"no_hal", c.ablation.no_hal},
            {"no_diffheg", c.ablation.no_diffheg}}},
          {"paper_literal_reverse", c.reverse.paper_literal_reverse},
          {"paper_literal_sigma", c.reverse.paper_literal_sigma},
          {"joint_score_sampled", c.joint_score_sampled},
          {"joint_score_positive", c.joint_score_positive},
          {"eval_joint", c.eval_joint},
          {"threads", c.threads}};
}

// ---------------------------------------------------------------- losses

double neg_log_sigmoid(double x) {
  return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

double hardness_adaptive_loss_from_scores(double positive_energy, double positive_margin,
                                          std::span<const ScoredNegative> negatives) {
  if (negatives.empty()) throw Error("hardness-adaptive loss needs at least one negative");
  double neg = 0.0;
  for (const auto& n : negatives) neg += n.weight * neg_log_sigmoid(n.score - n.margin);
  return neg_log_sigmoid(positive_margin - positive_energy) +
         neg / static_cast<double>(negatives.size());
}

double kgc_loss_from_scores(double positive_energy, std::span<const double> negative_scores,
                            double gamma) {
  if (negative_scores.empty()) throw Error("KGC loss needs at least one sampled negative");
  double neg = 0.0;
  for (double s : negative_scores) neg += neg_log_sigmoid(s - gamma);
  return neg_log_sigmoid(gamma - positive_energy) + neg / static_cast<double>(negative_scores.size());
}

double total_loss(double kgc, double ha, double lambda) { return kgc + lambda * ha; }

double joint_score(const EmbeddingSpace& space, const Triple& positive, Side side,
                   const GeneratedNegative& negative) {
  const Vec r = space.relation_embedding(positive.relation);
  double s = 0.0;
  for (Modality m : kModalities) {
    const Vec& generated = negative.embedding[static_cast<std::size_t>(m)];
    check_dim("generated embedding", space.dim, generated.size());
    s += side == Side::tail ? energy(space.kind, space.modality_embed(positive.head, m), r, generated)
                            : energy(space.kind, generated, r, space.modality_embed(positive.tail, m));
  }
  return s / 3.0;
}

double hardness_adaptive_loss(const EmbeddingSpace& space, const NegativeBundle& bundle,
                              bool joint_positive, double scale, EmbeddingSpace* grads) {
  if (bundle.entries.empty()) throw Error("hardness-adaptive loss needs a non-empty bundle");
  const Triple& p = bundle.positive;
  const Vec r = space.relation_embedding(p.relation);
  const double positive_margin = bundle.weighted_margin();
  const int positive_modalities = joint_positive ? 3 : 1;

  double e_pos = 0.0;
  std::array<EnergyGradient, 3> pos;
  for (int m = 0; m < positive_modalities; ++m) {
    const auto mod = static_cast<Modality>(m);
    pos[static_cast<std::size_t>(m)] = energy_gradient(space.kind, space.modality_embed(p.head, mod), r,
                                                       space.modality_embed(p.tail, mod));
    e_pos += pos[static_cast<std::size_t>(m)].value;
  }
  e_pos /= positive_modalities;

  std::vector<ScoredNegative> scored;
  for (const auto& e : bundle.entries)
    scored.push_back({joint_score(space, p, bundle.side, e), e.weight, e.margin});

  if (grads) {
    // d/dE of -log s(m - E) is s(E - m).
    const double pos_coef = scale * sigmoid(e_pos - positive_margin) / positive_modalities;
    for (int m = 0; m < positive_modalities; ++m) {
      const auto mod = static_cast<Modality>(m);
      accumulate_energy(space, *grads, pos[static_cast<std::size_t>(m)], pos_coef, p.head, mod,
                        p.relation, p.tail, mod, true, true);
    }

    std::array<Vec, 3> observed;
    for (Modality m : kModalities)
      observed[static_cast<std::size_t>(m)] =
          space.modality_embed(bundle.side == Side::tail ? p.head : p.tail, m);
    const double n = static_cast<double>(scored.size());
    for (std::size_t k = 0; k < scored.size(); ++k) {
      // d/dS of -(w/n) log s(S - m) is -(w/n) s(m - S); S averages three energies.
      const double coef =
          -scale * scored[k].weight / n * sigmoid(scored[k].margin - scored[k].score) / 3.0;
      for (Modality m : kModalities) {
        const auto i = static_cast<std::size_t>(m);
        const Vec& gen = bundle.entries[k].embedding[i];
        if (bundle.side == Side::tail) {
          const auto g = energy_gradient(space.kind, observed[i], r, gen);
          accumulate_energy(space, *grads, g, coef, p.head, m, p.relation, 0, m, true, false);
        } else {
          const auto g = energy_gradient(space.kind, gen, r, observed[i]);
          accumulate_energy(space, *grads, g, coef, 0, m, p.relation, p.tail, m, false, true);
        }
      }
    }
  }

  return hardness_adaptive_loss_from_scores(e_pos, positive_margin, scored);
}

double kgc_loss(const EmbeddingSpace& space, const SampledNegatives& sampled, double gamma,
                bool joint_sampled, double scale, EmbeddingSpace* grads) {
  if (sampled.entities.empty()) throw Error("KGC loss needs at least one sampled negative");
  const Triple& p = sampled.positive;
  const Vec r = space.relation_embedding(p.relation);
  const Vec h = space.modality_embed(p.head, Modality::structural);
  const Vec t = space.modality_embed(p.tail, Modality::structural);
  const double e_pos = energy(space.kind, h, r, t);

  const int modalities = joint_sampled ? 3 : 1;
  std::vector<double> scores;
  scores.reserve(sampled.entities.size());
  for (std::size_t k = 0; k < sampled.entities.size(); ++k) {
    const Triple c = sampled.corrupted(k);
    double s = 0.0;
    for (int m = 0; m < modalities; ++m) {
      const auto mod = static_cast<Modality>(m);
      s += energy(space.kind, space.modality_embed(c.head, mod), r, space.modality_embed(c.tail, mod));
    }
    scores.push_back(s / modalities);
  }

  if (grads) {
    const EnergyGradient pos = energy_gradient(space.kind, h, r, t);
    accumulate_energy(space, *grads, pos, scale * sigmoid(e_pos - gamma), p.head,
                      Modality::structural, p.relation, p.tail, Modality::structural, true, true);
    const double n = static_cast<double>(scores.size());
    for (std::size_t k = 0; k < scores.size(); ++k) {
      const Triple c = sampled.corrupted(k);
      const double coef = -scale / n * sigmoid(gamma - scores[k]) / modalities;
      for (int m = 0; m < modalities; ++m) {
        const auto mod = static_cast<Modality>(m);
        const auto g = energy_gradient(space.kind, space.modality_embed(c.head, mod), r,
                                       space.modality_embed(c.tail, mod));
        accumulate_energy(space, *grads, g, coef, c.head, mod, c.relation, c.tail, mod, true, true);
      }
    }
  }
  return kgc_loss_from_scores(e_pos, scores, gamma);
}

json to_json(const TrainReport& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs)
    epochs.push_back(
        {{"epoch", e.epoch}, {"loss", e.loss}, {"kgc", e.kgc}, {"ha", e.ha}, {"diff", e.diff}});
  json j = {{"epochs", epochs}};
  if (r.final_metrics) j["final_valid"] = to_json(*r.final_metrics);
  return j;
}

// ---------------------------------------------------------------- trainer

Trainer::Trainer(const Mmkg& kg, TrainConfig cfg)
    : kg_(kg),
      cfg_(std::move(cfg)),
      shuffle_rng_(Rng(cfg_.seed).substream(kShuffle)),
      sampler_rng_(Rng(cfg_.seed).substream(kSampler)),
      diffusion_rng_(Rng(cfg_.seed).substream(kDiffusion)),
      generation_root_(Rng(cfg_.seed).substream(kGeneration)) {
  cfg_.validate();
  if (kg.train.empty()) throw TrainingError("train split is empty");
  if (kg.num_entities() < 2) throw TrainingError("need at least two entities");
  if (cfg_.sampler == SamplerKind::bernoulli) bernoulli_ = bernoulli_stats(kg);
  schedule_ = make_schedule(cfg_.diffusion_steps);
  const Rng root(cfg_.seed);
  Rng init_rng = root.substream(kInitEmbeddings);
  space_ = EmbeddingSpace::init(cfg_.model, cfg_.dim, kg, init_rng);
  Rng denoiser_rng = root.substream(kInitDenoiser);
  denoiser_ = Denoiser::init(cfg_.dim, denoiser_rng);
  kge_adam_ = make_adam_state({.learning_rate = cfg_.lr_kge}, space_.tensors());
  diff_adam_ = make_adam_state({.learning_rate = cfg_.lr_diff}, denoiser_.tensors());
  order_.resize(kg.train.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
}

GenerationOptions generation_options(const TrainConfig& cfg) {
  GenerationOptions g;
  g.steps = cfg.effective_steps();
  g.gamma_min = cfg.gamma_min;
  g.gamma_max = cfg.gamma_max;
  g.use_condition = !cfg.ablation.no_mmc;
  g.reverse = cfg.reverse;
  return g;
}

GenerationOptions Trainer::generation_options() const { return dhns::generation_options(cfg_); }

double Trainer::diffusion_phase(std::span<const Triple> batch) {
  std::vector<DiffusionSample> samples;
  samples.reserve(2 * batch.size());
  for (const Triple& tr : batch) {
    const Vec r = space_.relation_embedding(tr.relation);
    for (Side side : {Side::head, Side::tail}) {
      DiffusionSample s;
      s.t = 1 + static_cast<int>(diffusion_rng_.below(static_cast<std::uint64_t>(schedule_.steps)));
      s.noise = diffusion_rng_.normal_vec(cfg_.dim);
      const EntityId generated = side == Side::tail ? tr.tail : tr.head;
      const EntityId observed = side == Side::tail ? tr.head : tr.tail;
      for (Modality m : kModalities) {
        const auto i = static_cast<std::size_t>(m);
        s.clean[i] = space_.modality_embed(generated, m);
        s.condition[i] = cfg_.ablation.no_mmc
                             ? Vec(Vec::Zero(cfg_.dim))
                             : condition_for(cfg_.model, side, space_.modality_embed(observed, m), r);
      }
      samples.push_back(std::move(s));
    }
  }
  Denoiser grads = denoiser_.zeros_like();
  const double loss = diffusion_loss_and_grad(denoiser_, schedule_, samples, grads);
  adam_step(diff_adam_, denoiser_.tensors(), grads.tensors());
  return loss;
}

std::vector<BundlePair> Trainer::generation_phase(std::span<const Triple> batch,
                                                  std::uint64_t stream_tag,
                                                  std::uint64_t first_index) const {
  const GenerationOptions opt = generation_options();
  std::vector<BundlePair> out(batch.size());
  const int threads = resolve_threads(cfg_.threads);
  const std::size_t chunks = std::min<std::size_t>(static_cast<std::size_t>(threads), batch.size());
  const std::size_t per_chunk = chunks == 0 ? 0 : (batch.size() + chunks - 1) / chunks;
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t begin = c * per_chunk;
    const std::size_t end = std::min(batch.size(), begin + per_chunk);
    if (begin >= end) return;
    const auto part = batch.subspan(begin, end - begin);
    for (Side side : {Side::head, Side::tail}) {
      std::vector<Rng> rngs;
      for (std::size_t i = begin; i < end; ++i)
        rngs.push_back(generation_root_.substream(stream_tag, first_index + i,
                                                  static_cast<std::uint64_t>(side)));
      auto bundles = generate_bundles(denoiser_, schedule_, space_, part, side, opt, rngs);
      for (std::size_t i = begin; i < end; ++i) {
        auto& b = bundles[i - begin];
        if (cfg_.ablation.no_hal)
          for (auto& e : b.entries) e.margin = cfg_.gamma;
        out[i][side == Side::head ? 0 : 1] = std::move(b);
      }
    }
  });
  return out;
}

BatchStats Trainer::kge_phase(std::span<const Triple> batch, std::span<const BundlePair> bundles) {
  const double lambda = cfg_.effective_lambda();
  const bool with_generated = !bundles.empty() && lambda > 0.0;
  if (with_generated) check_dim("bundle count", static_cast<Eigen::Index>(batch.size()),
                                static_cast<Eigen::Index>(bundles.size()));
  EmbeddingSpace grads = space_.zeros_like();
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  BatchStats stats;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const SampledNegatives sampled =
        draw_negatives(cfg_, bernoulli_, kg_.num_entities(), batch[i], sampler_rng_);
    const double kgc =
        kgc_loss(space_, sampled, cfg_.gamma, cfg_.joint_score_sampled, inv_batch, &grads);
    double ha = 0.0;
    if (with_generated) {
      const double scale = lambda * inv_batch / 2.0;
      ha = 0.5 * (hardness_adaptive_loss(space_, bundles[i][0], cfg_.joint_score_positive, scale, &grads) +
                  hardness_adaptive_loss(space_, bundles[i][1], cfg_.joint_score_positive, scale, &grads));
    }
    stats.kgc += kgc;
    stats.ha += ha;
    stats.loss += total_loss(kgc, ha, lambda);
  }
  adam_step(kge_adam_, space_.tensors(), grads.tensors());
  return stats;
}

EpochLog Trainer::run_epoch() {
  ++epoch_;
  shuffle(order_, shuffle_rng_);
  EpochLog log;
  log.epoch = epoch_;
  std::size_t batches = 0;
  const auto bs = static_cast<std::size_t>(cfg_.batch_size);
  for (std::size_t start = 0; start < order_.size(); start += bs, ++batches) {
    const std::size_t end = std::min(order_.size(), start + bs);
    std::vector<Triple> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(kg_.train[order_[i]]);

    if (cfg_.trains_diffusion()) {
      const double diff = diffusion_phase(batch);
      check_finite(diff, "L_diff", epoch_, batches);
      log.diff += diff;
    }
    std::vector<BundlePair> bundles;
    if (cfg_.uses_generated())
      bundles = generation_phase(batch, static_cast<std::uint64_t>(epoch_), start);
    const BatchStats stats = kge_phase(batch, bundles);
    check_finite(stats.kgc, "L_KGC", epoch_, batches);
    check_finite(stats.ha, "L_HA", epoch_, batches);
    log.loss += stats.loss;
    log.kgc += stats.kgc;
    log.ha += stats.ha;
  }
  const double n = static_cast<double>(order_.size());
  log.loss /= n;
  log.kgc /= n;
  log.ha /= n;
  if (batches > 0) log.diff /= static_cast<double>(batches);
  return log;
}

TrainReport Trainer::run() {
  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  for (int e = 0; e < cfg_.epochs; ++e) report.epochs.push_back(run_epoch());
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

Checkpoint make_checkpoint(const TrainConfig& cfg, const Mmkg& kg, const EmbeddingSpace& space,
                           const Denoiser& denoiser) {
  Checkpoint c;
  c.meta = {{"config", to_json(cfg)},
            {"entities", kg.num_entities()},
            {"relations", kg.num_relations()},
            {"visual_dim", kg.visual->dim()},
            {"textual_dim", kg.textual->dim()}};
  EmbeddingSpace s = space;
  Denoiser d = denoiser;
  c.add(s.tensors());
  c.add(d.tensors());
  return c;
}

Checkpoint Trainer::checkpoint() const { return make_checkpoint(cfg_, kg_, space_, denoiser_); }

namespace {

std::optional<EvalResult> validation_metrics(const EmbeddingSpace& space, const Mmkg& kg,
                                             const TrainConfig& cfg) {
  if (kg.valid.empty()) return std::nullopt;
  const FilterIndex filter(kg);
  return evaluate(space, kg, filter, "valid", {cfg.eval_joint, resolve_threads(cfg.threads)});
}

}  // namespace

TrainResult train(const Mmkg& kg, const TrainConfig& cfg) {
  Trainer trainer(kg, cfg);
  TrainReport report = trainer.run();
  report.final_metrics = validation_metrics(trainer.space(), kg, cfg);
  return {trainer.space(), trainer.denoiser(), std::move(report)};
}

TrainResult train_baseline(const Mmkg& kg, const TrainConfig& cfg) {
  cfg.validate();
  if (kg.train.empty()) throw TrainingError("train split is empty");
  const Rng root(cfg.seed);
  Rng init_rng = root.substream(kInitEmbeddings);
  Rng shuffle_rng = root.substream(kShuffle);
  Rng sampler_rng = root.substream(kSampler);
  std::optional<BernoulliStats> stats;
  if (cfg.sampler == SamplerKind::bernoulli) stats = bernoulli_stats(kg);

  EmbeddingSpace space = EmbeddingSpace::init(cfg.model, cfg.dim, kg, init_rng);
  AdamState adam = make_adam_state({.learning_rate = cfg.lr_kge}, space.tensors());
  std::vector<std::size_t> order(kg.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const auto start_time = std::chrono::steady_clock::now();
  TrainReport report;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    EpochLog log;
    log.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      EmbeddingSpace grads = space.zeros_like();
      double batch_kgc = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const Triple& positive = kg.train[order[i]];
        const auto sampled = draw_negatives(cfg, stats, kg.num_entities(), positive, sampler_rng);
        batch_kgc += kgc_loss(space, sampled, cfg.gamma, cfg.joint_score_sampled, inv_batch, &grads);
      }
      adam_step(adam, space.tensors(), grads.tensors());
      check_finite(batch_kgc, "L_KGC", epoch, start / bs);
      log.kgc += batch_kgc;
      log.loss += batch_kgc;
    }
    log.kgc /= static_cast<double>(order.size());
    log.loss /= static_cast<double>(order.size());
    report.epochs.push_back(log);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  report.final_metrics = validation_metrics(space, kg, cfg);
  return {std::move(space), Denoiser::zeros(cfg.dim), std::move(report)};
}

LoadedModel load_model(const Checkpoint& ckpt, const Mmkg& kg) {
  if (!ckpt.meta.contains("config")) throw CheckpointError("checkpoint has no config");
  LoadedModel m;
  m.config = config_from_json(ckpt.meta.at("config"));
  if (ckpt.meta.value("entities", -1) != kg.num_entities() ||
      ckpt.meta.value("relations", -1) != kg.num_relations())
    throw CheckpointError("checkpoint vocabulary sizes do not match the dataset");
  m.space = EmbeddingSpace::zeros(m.config.model, m.config.dim, kg.num_entities(),
                                  kg.num_relations(), kg.visual, kg.textual);
  ckpt.restore(m.space.tensors());
  m.denoiser = Denoiser::zeros(m.config.dim);
  ckpt.restore(m.denoiser.tensors());
  return m;
}

}  // namespace dhns
