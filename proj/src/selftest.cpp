#include "dhns/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>

#include "dhns/checkpoint.hpp"
#include "dhns/diffusion.hpp"
#include "dhns/evaluation.hpp"
#include "dhns/gradcheck.hpp"
#include "dhns/negatives.hpp"
#include "dhns/synthetic.hpp"
#include "dhns/training.hpp"

namespace dhns {

namespace {

struct Outcome {
  bool passed;
  std::string detail;
};

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << x;
  return s.str();
}

Outcome reconstruction() {
  Rng rng(11);
  double worst = 0.0;
  for (int total : {20, 50, 70, 100}) {
    const NoiseSchedule s = make_schedule(total);
    for (int k = 0; k < 20; ++k) {
      const Vec x0 = rng.normal_vec(16);
      const Vec eps = rng.normal_vec(16);
      const Vec back = reverse_final(s, forward_noise(s, x0, 1, eps), eps);
      worst = std::max(worst, (back - x0).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-9, "max abs err " + fmt(worst)};
}

Outcome schedule_shape() {
  const NoiseSchedule s = make_schedule(100);
  bool ok = std::abs(s.alpha_at(1) - 1e-4) < 1e-15 && std::abs(s.alpha_at(100) - 0.02) < 1e-15;
  for (int t = 2; t <= 100; ++t) ok = ok && s.beta_bar_at(t) < s.beta_bar_at(t - 1);
  return {ok, "alpha endpoints and decreasing beta_bar"};
}

Outcome margins_and_weights() {
  const auto steps = default_steps(100);
  double sum = 0.0;
  for (int t : steps) sum += level_weight(t, 100, steps);
  bool ok = steps == std::vector<int>{5, 10, 20, 50} && std::abs(sum - 1.0) < 1e-12;
  const double expected[] = {1.0 / 17, 2.0 / 17, 4.0 / 17, 10.0 / 17};
  for (std::size_t i = 0; i < steps.size(); ++i)
    ok = ok && std::abs(level_weight(steps[i], 100, steps) - expected[i]) < 1e-12;
  ok = ok && level_margin(1, 100, 4.0, 8.0) == 4.0 && level_margin(100, 100, 4.0, 8.0) == 8.0;
  for (int t = 2; t <= 100; ++t)
    ok = ok && level_margin(t, 100, 4.0, 8.0) > level_margin(t - 1, 100, 4.0, 8.0);
  return {ok, "weights sum " + fmt(sum)};
}

Outcome energy_gradients() {
  Rng rng(12);
  double worst = 0.0;
  for (ModelKind kind : {ModelKind::translation, ModelKind::bilinear, ModelKind::rotation}) {
    for (int trial = 0; trial < 5; ++trial) {
      Vec h = rng.normal_vec(8), t = rng.normal_vec(8);
      Vec r = kind == ModelKind::rotation ? Vec(phases_to_unit_complex(rng.normal_vec(4)))
                                          : Vec(rng.normal_vec(8));
      const EnergyGradient g = energy_gradient(kind, h, r, t);
      const auto f = [&] { return energy(kind, h, r, t); };
      worst = std::max(worst, relative_error(g.head, numeric_gradient(f, {h.data(), 8})));
      worst = std::max(worst, relative_error(g.tail, numeric_gradient(f, {t.data(), 8})));
      worst = std::max(worst, relative_error(g.relation, numeric_gradient(f, {r.data(), 8})));
    }
  }
  return {worst <= 1e-5, "max rel err " + fmt(worst)};
}

Outcome denoiser_gradient() {
  Rng rng(13);
  Denoiser p = Denoiser::init(4, rng);
  const NoiseSchedule s = make_schedule(20);
  std::vector<DiffusionSample> batch(3);
  for (auto& b : batch) {
    b.t = 1 + static_cast<int>(rng.below(20));
    b.noise = rng.normal_vec(4);
    for (auto& c : b.clean) c = rng.normal_vec(4);
    for (auto& c : b.condition) c = rng.normal_vec(4);
  }
  Denoiser grads = p.zeros_like();
  diffusion_loss_and_grad(p, s, batch, grads);
  auto params = p.tensors();
  auto analytic = grads.tensors();
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Vec numeric = numeric_gradient([&] { return diffusion_loss(p, s, batch); }, params[i].values);
    const Vec exact = Eigen::Map<const Vec>(analytic[i].values.data(),
                                            static_cast<Eigen::Index>(analytic[i].values.size()));
    worst = std::max(worst, relative_error(exact, numeric));
  }
  return {worst <= 1e-5, "max rel err " + fmt(worst)};
}

Outcome ranking() {
  SyntheticSpec spec;
  spec.entities = 20;
  spec.relations = 3;
  spec.triples = 60;
  spec.seed = 5;
  const auto ds = make_synthetic(spec);
  Rng rng(14);
  const EmbeddingSpace space = EmbeddingSpace::init(ModelKind::translation, 8, ds.kg, rng);
  const FilterIndex filter(ds.kg);
  for (const Triple& truth : ds.kg.test) {
    for (Side side : {Side::head, Side::tail}) {
      const auto score = [&](EntityId e) {
        Triple c = truth;
        (side == Side::head ? c.head : c.tail) = e;
        return energy(space.kind, space.entity.row(c.head).transpose(),
                      space.relation_embedding(c.relation), space.entity.row(c.tail).transpose());
      };
      const double true_score = score(side == Side::head ? truth.head : truth.tail);
      double better = 0.0, tied = 0.0;
      for (EntityId e = 0; e < ds.kg.num_entities(); ++e) {
        Triple c = truth;
        (side == Side::head ? c.head : c.tail) = e;
        if (c == truth || filter.contains(c)) continue;
        const double sc = score(e);
        if (sc < true_score) better += 1.0;
        else if (sc == true_score) tied += 1.0;
      }
      const double expected = 1.0 + better + tied / 2.0;
      if (rank_query(space, filter, truth, side) != expected)
        return {false, "rank mismatch"};
    }
  }
  return {true, std::to_string(ds.kg.test.size()) + " test triples, both sides"};
}

Outcome loss_values() {
  const ScoredNegative neg{3.0, 1.0, 2.0};
  const double ha = hardness_adaptive_loss_from_scores(1.0, 2.0, std::span(&neg, 1));
  const double hand = -2.0 * std::log(1.0 / (1.0 + std::exp(-1.0)));
  const double kgc = kgc_loss_from_scores(6.0, std::vector<double>{6.0, 6.0}, 6.0);
  const bool ok = std::abs(ha - hand) < 1e-9 && std::abs(kgc - 2.0 * std::log(2.0)) < 1e-12 &&
                  total_loss(kgc, ha, 0.5) == kgc + 0.5 * ha;
  return {ok, "L_HA " + fmt(ha)};
}

Outcome checkpoint_round_trip() {
  Rng rng(15);
  Denoiser p = Denoiser::init(4, rng);
  Checkpoint c;
  c.meta = {{"check", true}};
  c.add(p.tensors());
  const auto path = std::filesystem::temp_directory_path() /
                    ("dhns-selftest-" + std::to_string(std::hash<const void*>{}(&c)) + ".bin");
  write_checkpoint(path, c);
  const Checkpoint back = read_checkpoint(path);
  std::filesystem::remove(path);
  Denoiser q = Denoiser::zeros(4);
  back.restore(q.tensors());
  bool ok = back.meta == c.meta;
  for (std::size_t m = 0; m < 3; ++m) ok = ok && q.nets[m].w1 == p.nets[m].w1 && q.nets[m].gain == p.nets[m].gain;
  return {ok, std::to_string(back.tensors.size()) + " tensors"};
}

Outcome determinism() {
  SyntheticSpec spec;
  spec.entities = 30;
  spec.relations = 3;
  spec.triples = 120;
  const auto ds = make_synthetic(spec);
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.diffusion_steps = 20;
  cfg.epochs = 2;
  cfg.batch_size = 32;
  cfg.negatives = 4;
  const auto a = train(ds.kg, cfg);
  const auto b = train(ds.kg, cfg);
  const bool ok = a.space.entity == b.space.entity && a.denoiser.nets[0].w1 == b.denoiser.nets[0].w1 &&
                  to_json(a.report).dump() == to_json(b.report).dump();
  return {ok, "two identical runs"};
}

}  // namespace

std::vector<CheckResult> run_selftest() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
      {"one-step reconstruction", reconstruction},
      {"noise schedule", schedule_shape},
      {"margins and weights", margins_and_weights},
      {"energy gradients", energy_gradients},
      {"denoiser gradient", denoiser_gradient},
      {"filtered ranking", ranking},
      {"loss values", loss_values},
      {"checkpoint round trip", checkpoint_round_trip},
      {"determinism", determinism},
  };
  std::vector<CheckResult> out;
  for (const auto& [name, check] : checks) {
    try {
      const Outcome o = check();
      out.push_back({name, o.passed, o.detail});
    } catch (const std::exception& e) {
      out.push_back({name, false, e.what()});
    }
  }
  return out;
}

}  // namespace dhns
