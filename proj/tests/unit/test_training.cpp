#include <doctest.h>

#include <cmath>
#include <cstring>

#include "dhns/synthetic.hpp"
#include "dhns/training.hpp"
#include "support/oracles.hpp"

using namespace dhns;
using nlohmann::json;

namespace {

SyntheticDataset small_dataset(std::uint64_t seed = 0) {
  SyntheticSpec spec;
  spec.entities = 30;
  spec.relations = 3;
  spec.triples = 150;
  spec.seed = seed;
  spec.masked_fraction = 0.1;
  return make_synthetic(spec);
}

TrainConfig small_config() {
  TrainConfig c;
  c.dim = 8;
  c.diffusion_steps = 20;
  c.epochs = 3;
  c.batch_size = 32;
  c.negatives = 4;
  c.gamma = 3.0;
  c.gamma_min = 2.0;
  c.gamma_max = 4.0;
  c.lr_kge = 0.05;
  return c;
}

bool same_bits(const Mat& a, const Mat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool same_space(const EmbeddingSpace& a, const EmbeddingSpace& b) {
  EmbeddingSpace x = a, y = b;
  const auto ta = x.tensors(), tb = y.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i)
    if (std::memcmp(ta[i].values.data(), tb[i].values.data(), ta[i].values.size_bytes()) != 0) return false;
  return true;
}

double nls(double x) { return -std::log(1.0 / (1.0 + std::exp(-x))); }

Vec embed(const EmbeddingSpace& s, EntityId e, Modality m) {
  const auto& f = m == Modality::visual ? *s.visual_features : *s.textual_features;
  switch (m) {
    case Modality::structural: return s.entity.row(e).transpose();
    case Modality::visual:
      return f.present[static_cast<std::size_t>(e)] ? Vec(s.visual_weight * f.values.row(e).transpose() + s.visual_bias)
                                                    : s.visual_absent;
    case Modality::textual:
      return f.present[static_cast<std::size_t>(e)] ? Vec(s.textual_weight * f.values.row(e).transpose() + s.textual_bias)
                                                    : s.textual_absent;
  }
  return {};
}

Vec relation(const EmbeddingSpace& s, RelationId r) {
  return s.kind == ModelKind::rotation ? oracle::unit_complex(s.relation.row(r).transpose())
                                       : Vec(s.relation.row(r).transpose());
}

double ha_reference(const EmbeddingSpace& s, const NegativeBundle& b, bool joint_positive) {
  const Triple& p = b.positive;
  const Vec r = relation(s, p.relation);
  double margin = 0.0;
  for (const auto& e : b.entries) margin += e.weight * e.margin;
  double e_pos = 0.0;
  for (Modality m : kModalities) {
    if (!joint_positive && m != Modality::structural) continue;
    e_pos += oracle::energy(s.kind, embed(s, p.head, m), r, embed(s, p.tail, m));
  }
  double loss = nls(margin - (joint_positive ? e_pos / 3.0 : e_pos));
  double neg = 0.0;
  for (const auto& e : b.entries) {
    double score = 0.0;
    for (Modality m : kModalities) {
      const Vec& g = e.embedding[static_cast<std::size_t>(m)];
      score += b.side == Side::tail ? oracle::energy(s.kind, embed(s, p.head, m), r, g)
                                    : oracle::energy(s.kind, g, r, embed(s, p.tail, m));
    }
    neg += e.weight * nls(score / 3.0 - e.margin);
  }
  return loss + neg / static_cast<double>(b.entries.size());
}

double kgc_reference(const EmbeddingSpace& s, const SampledNegatives& sn, double gamma) {
  const Triple& p = sn.positive;
  const Vec r = relation(s, p.relation);
  double loss = nls(gamma - oracle::energy(s.kind, embed(s, p.head, Modality::structural), r,
                                           embed(s, p.tail, Modality::structural)));
  double neg = 0.0;
  for (std::size_t i = 0; i < sn.entities.size(); ++i) {
    const Triple c = sn.corrupted(i);
    neg += nls(oracle::energy(s.kind, embed(s, c.head, Modality::structural), r,
                              embed(s, c.tail, Modality::structural)) - gamma);
  }
  return loss + neg / static_cast<double>(sn.entities.size());
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("config JSON round trip and defaults") {
    TrainConfig c = small_config();
    c.ablation.no_hal = true;
    c.sampler = SamplerKind::bernoulli;
    c.steps = {3, 7};
    c.reverse.paper_literal_sigma = true;
    const TrainConfig back = config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    const TrainConfig d = config_from_json(json::object());
    CHECK(d.model == ModelKind::rotation);
    CHECK(d.diffusion_steps == 100);
  }

  TEST_CASE("config errors name the offending field") {
    const auto field_of = [](const json& j) {
      try {
        config_from_json(j);
      } catch (const ConfigError& e) {
        return e.field();
      }
      return std::string("<none>");
    };
    CHECK(field_of({{"dimension", 8}}) == "dimension");
    CHECK(field_of({{"dim", "eight"}}) == "dim");
    CHECK(field_of({{"dim", 7}}) == "dim");
    CHECK(field_of({{"lambda", -1.0}}) == "lambda");
    CHECK(field_of({{"gamma_min", 5.0}, {"gamma_max", 5.0}}) == "gamma_max");
    CHECK(field_of({{"model", "quate"}}) == "model");
    CHECK(field_of({{"steps", {0, 5}}}) == "steps");
    CHECK(field_of({{"ablation", {{"no_everything", true}}}}) == "ablation.no_everything");
    CHECK(field_of({{"seed", -3}}) == "seed");
    CHECK(field_of(json::array()) == "<root>");
  }

  TEST_CASE("ablation flags map to effective settings") {
    TrainConfig c;
    CHECK(c.effective_steps() == std::vector<int>{5, 10, 20, 50});
    c.ablation.no_mhld = true;
    CHECK(c.effective_steps() == std::vector<int>{50});
    c = TrainConfig{};
    c.ablation.no_ntat = true;
    CHECK(c.effective_lambda() == 0.0);
    CHECK(c.trains_diffusion());
    CHECK_FALSE(c.uses_generated());
    c = TrainConfig{};
    c.ablation.no_diffheg = true;
    CHECK_FALSE(c.trains_diffusion());
    CHECK_FALSE(c.uses_generated());
    c = TrainConfig{};
    c.ablation.no_mmc = true;
    CHECK_FALSE(generation_options(c).use_condition);
  }

  TEST_CASE("loss hand values") {
    const ScoredNegative one{3.0, 1.0, 2.0};
    CHECK(std::abs(hardness_adaptive_loss_from_scores(1.0, 2.0, std::span(&one, 1)) -
                   (-2.0 * std::log(1.0 / (1.0 + std::exp(-1.0))))) <= 1e-9);
    CHECK(hardness_adaptive_loss_from_scores(1.0, 2.0, std::span(&one, 1)) ==
          doctest::Approx(0.62652).epsilon(1e-5));
    CHECK(kgc_loss_from_scores(4.0, std::vector<double>{4.0, 4.0, 4.0}, 4.0) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
    CHECK(total_loss(1.0, 0.5, 1.0) == 1.5);
    CHECK(total_loss(0.7, 123.0, 0.0) == 0.7);
    CHECK(total_loss(1.0, 2.0, 0.25) + total_loss(1.0, 2.0, 0.75) == 2.0 * total_loss(1.0, 2.0, 0.5));
  }

  TEST_CASE("loss properties") {
    const std::vector<double> scores = {1.0, 5.0, 2.5};
    std::vector<double> doubled = scores;
    doubled.insert(doubled.end(), scores.begin(), scores.end());
    CHECK(kgc_loss_from_scores(2.0, scores, 3.0) == doctest::Approx(kgc_loss_from_scores(2.0, doubled, 3.0)));
    CHECK(kgc_loss_from_scores(1.0, scores, 3.0) < kgc_loss_from_scores(2.0, scores, 3.0));
    const ScoredNegative far{1e6, 1.0, 2.0};
    CHECK(hardness_adaptive_loss_from_scores(1.0, 2.0, std::span(&far, 1)) == doctest::Approx(nls(1.0)));
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
      const ScoredNegative n{rng.uniform(-50, 50), rng.uniform(), rng.uniform(0.1, 5)};
      CHECK(hardness_adaptive_loss_from_scores(rng.uniform(-50, 50), rng.uniform(0.1, 5), std::span(&n, 1)) > 0.0);
    }
    CHECK(neg_log_sigmoid(-800.0) == doctest::Approx(800.0));
    CHECK(neg_log_sigmoid(800.0) >= 0.0);
    CHECK_THROWS_AS(kgc_loss_from_scores(1.0, std::vector<double>{}, 1.0), Error);
  }

  TEST_CASE("joint score averages the three modality energies") {
    auto ds = small_dataset();
    EmbeddingSpace s = EmbeddingSpace::zeros(ModelKind::translation, 4, ds.kg.num_entities(),
                                             ds.kg.num_relations(), ds.kg.visual, ds.kg.textual);
    const Triple p{0, 0, 1};
    GeneratedNegative g;
    g.embedding = {Vec::Zero(4), Vec::Zero(4), Vec::Zero(4)};
    g.embedding[1][0] = 3.0;
    g.embedding[2][2] = -6.0;
    CHECK(joint_score(s, p, Side::tail, g) == doctest::Approx(3.0));
    for (auto& v : g.embedding) v = Vec::Constant(4, 0.5);
    CHECK(joint_score(s, p, Side::head, g) == doctest::Approx(1.0));
  }

  TEST_CASE("loss gradients match central differences on every parameter group") {
    auto ds = small_dataset(2);
    for (ModelKind kind : {ModelKind::rotation, ModelKind::translation, ModelKind::bilinear}) {
      Rng rng(3);
      EmbeddingSpace s = EmbeddingSpace::init(kind, 6, ds.kg, rng);
      const Denoiser den = Denoiser::init(6, rng);
      const NoiseSchedule sched = make_schedule(20);
      GenerationOptions opt;
      opt.steps = default_steps(20);
      opt.gamma_min = 1.0;
      opt.gamma_max = 3.0;
      // Pick a positive whose head has a masked visual row when possible.
      Triple p = ds.kg.train[0];
      for (const auto& t : ds.kg.train)
        if (!ds.kg.visual->present[static_cast<std::size_t>(t.head)]) p = t;
      for (Side side : {Side::head, Side::tail}) {
        for (bool joint : {false, true}) {
          Rng g(4);
          const NegativeBundle b = generate_bundle(den, sched, s, p, side, opt, g);
          const SampledNegatives sn = sample_uniform(ds.kg.num_entities(), p, side, 5, g);
          EmbeddingSpace grads = s.zeros_like();
          const double ha = hardness_adaptive_loss(s, b, joint, 0.7, &grads);
          const double kgc = kgc_loss(s, sn, 2.0, false, 1.3, &grads);
          CHECK(ha == doctest::Approx(ha_reference(s, b, joint)).epsilon(1e-12));
          CHECK(kgc == doctest::Approx(kgc_reference(s, sn, 2.0)).epsilon(1e-12));
          const auto loss = [&] { return 0.7 * ha_reference(s, b, joint) + 1.3 * kgc_reference(s, sn, 2.0); };
          auto live = s.tensors();
          auto exact = grads.tensors();
          for (std::size_t k = 0; k < live.size(); ++k) {
            const Vec fd = oracle::central_difference(loss, live[k].values.data(), live[k].values.size());
            const Vec an = Eigen::Map<const Vec>(exact[k].values.data(), fd.size());
            CHECK_MESSAGE(oracle::rel_err(an, fd) <= 1e-4, (dhns::to_string(kind) + " " + live[k].name));
          }
        }
      }
    }
  }

  TEST_CASE("logged loss equals L_KGC + lambda * L_HA every epoch") {
    auto ds = small_dataset();
    TrainConfig c = small_config();
    c.lambda = 0.35;
    const TrainResult r = train(ds.kg, c);
    REQUIRE(r.report.epochs.size() == 3);
    for (const auto& e : r.report.epochs) {
      CHECK(std::abs(e.loss - (e.kgc + 0.35 * e.ha)) <= 1e-12);
      CHECK(e.ha > 0.0);
      CHECK(e.diff > 0.0);
      CHECK(std::isfinite(e.loss));
    }
  }

  TEST_CASE("lambda = 0, no_ntat and no_diffheg reproduce the baseline trainer bit for bit") {
    auto ds = small_dataset();
    TrainConfig c = small_config();
    c.lambda = 0.0;
    const TrainResult base = train_baseline(ds.kg, c);
    const TrainResult zero = train(ds.kg, c);
    CHECK(same_space(zero.space, base.space));
    for (std::size_t e = 0; e < base.report.epochs.size(); ++e) {
      CHECK(zero.report.epochs[e].loss == base.report.epochs[e].loss);
      CHECK(zero.report.epochs[e].kgc == base.report.epochs[e].kgc);
      CHECK(zero.report.epochs[e].diff > 0.0);
    }
    CHECK(to_json(*zero.report.final_metrics) == to_json(*base.report.final_metrics));

    TrainConfig ntat = small_config();
    ntat.ablation.no_ntat = true;
    const TrainResult n = train(ds.kg, ntat);
    CHECK(same_space(n.space, base.space));
    CHECK(n.report.epochs[0].diff > 0.0);

    TrainConfig off = small_config();
    off.lambda = 0.0;
    off.ablation.no_diffheg = true;
    const TrainResult d = train(ds.kg, off);
    CHECK(same_space(d.space, base.space));
    for (std::size_t e = 0; e < d.report.epochs.size(); ++e) {
      CHECK(d.report.epochs[e].loss == base.report.epochs[e].loss);
      CHECK(d.report.epochs[e].diff == 0.0);
    }
  }

  TEST_CASE("diffusion updates happen under no_ntat but not under no_diffheg") {
    auto ds = small_dataset();
    TrainConfig c = small_config();
    c.epochs = 1;
    Trainer fresh(ds.kg, c);
    const Denoiser start = fresh.denoiser();
    c.ablation.no_ntat = true;
    Trainer ntat(ds.kg, c);
    ntat.run();
    CHECK_FALSE(same_bits(ntat.denoiser().nets[1].w2, start.nets[1].w2));
    c.ablation.no_ntat = false;
    c.ablation.no_diffheg = true;
    Trainer off(ds.kg, c);
    off.run();
    CHECK(same_bits(off.denoiser().nets[1].w2, start.nets[1].w2));
  }

  TEST_CASE("generated negatives are constants for the KGE step") {
    auto ds = small_dataset();
    Trainer t(ds.kg, small_config());
    std::vector<Triple> batch(ds.kg.train.begin(), ds.kg.train.begin() + 16);
    const auto bundles = t.generation_phase(batch, 1);
    const Denoiser before = t.denoiser();
    const EmbeddingSpace space_before = t.space();
    const BatchStats stats = t.kge_phase(batch, bundles);
    CHECK(stats.ha > 0.0);
    for (std::size_t m = 0; m < 3; ++m) {
      CHECK(same_bits(t.denoiser().nets[m].w1, before.nets[m].w1));
      CHECK(same_bits(t.denoiser().nets[m].w2, before.nets[m].w2));
    }
    CHECK_FALSE(same_space(t.space(), space_before));
    REQUIRE(bundles.size() == 16);
    CHECK(bundles[3][0].side == Side::head);
    CHECK(bundles[3][1].side == Side::tail);
    CHECK(bundles[3][1].entries.size() == default_steps(20).size());
  }

  TEST_CASE("no_hal replaces every generated margin by gamma") {
    auto ds = small_dataset();
    TrainConfig c = small_config();
    c.ablation.no_hal = true;
    Trainer t(ds.kg, c);
    std::vector<Triple> batch(ds.kg.train.begin(), ds.kg.train.begin() + 4);
    for (const auto& pair : t.generation_phase(batch, 1))
      for (const auto& b : pair) {
        double w = 0.0;
        for (const auto& e : b.entries) {
          CHECK(e.margin == c.gamma);
          w += e.weight;
        }
        CHECK(w == doctest::Approx(1.0));
      }
    c.ablation.no_hal = false;
    c.ablation.no_mhld = true;
    Trainer single(ds.kg, c);
    for (const auto& pair : single.generation_phase(batch, 1)) CHECK(pair[0].entries.size() == 1);
  }

  TEST_CASE("training is deterministic and thread count only perturbs rounding") {
    auto ds = small_dataset();
    TrainConfig c = small_config();
    c.epochs = 2;
    const TrainResult a = train(ds.kg, c);
    const TrainResult b = train(ds.kg, c);
    CHECK(same_space(a.space, b.space));
    CHECK(to_json(a.report).dump() == to_json(b.report).dump());
    c.threads = 3;
    const TrainResult m = train(ds.kg, c);
    CHECK((m.space.entity - a.space.entity).cwiseAbs().maxCoeff() <= 1e-10);
    c.threads = 1;
    c.seed = 1;
    CHECK_FALSE(same_space(train(ds.kg, c).space, a.space));
  }

  TEST_CASE("bernoulli sampler and joint sampled scoring run") {
    auto ds = small_dataset();
    TrainConfig c = small_config();
    c.sampler = SamplerKind::bernoulli;
    c.joint_score_sampled = true;
    c.eval_joint = true;
    c.model = ModelKind::bilinear;
    const TrainResult r = train(ds.kg, c);
    REQUIRE(r.report.final_metrics.has_value());
    CHECK(r.report.final_metrics->mrr > 0.0);
  }

  TEST_CASE("non-finite losses abort with a diagnostic") {
    auto ds = small_dataset();
    Trainer t(ds.kg, small_config());
    t.mutable_space().entity.setConstant(std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_WITH_AS(t.run_epoch(), doctest::Contains("non-finite"), TrainingError);
  }

  TEST_CASE("checkpoint restores a model that evaluates identically") {
    auto ds = small_dataset();
    TrainConfig c = small_config();
    Trainer t(ds.kg, c);
    t.run();
    oracle::TempDir dir("model");
    write_checkpoint(dir.path / "m.bin", t.checkpoint());
    const LoadedModel m = load_model(read_checkpoint(dir.path / "m.bin"), ds.kg);
    CHECK(to_json(m.config) == to_json(c));
    CHECK(same_space(m.space, t.space()));
    CHECK(same_bits(m.denoiser.nets[2].w1, t.denoiser().nets[2].w1));
    const FilterIndex f(ds.kg);
    CHECK(to_json(evaluate(m.space, ds.kg, f, "test")) == to_json(evaluate(t.space(), ds.kg, f, "test")));
    auto other = small_dataset();
    other.kg.entities.add("extra");
    CHECK_THROWS_AS(load_model(read_checkpoint(dir.path / "m.bin"), other.kg), Error);
  }

  TEST_CASE("desk-scale run: L_KGC at the end is below epoch 1") {
    SyntheticSpec spec;  // 200 entities, 10 relations, 2000 triples
    const auto ds = make_synthetic(spec);
    TrainConfig c;  // rotation, d = 32, T = 100, 50 epochs
    const TrainResult r = train(ds.kg, c);
    REQUIRE(r.report.epochs.size() == 50);
    CHECK(r.report.epochs.back().kgc < r.report.epochs.front().kgc);
    for (const auto& e : r.report.epochs) CHECK(std::isfinite(e.loss));
  }
}
