#include "dhns/negatives.hpp"

#include <algorithm>
#include <cmath>

namespace dhns {

std::vector<int> default_steps(int total_steps, bool multi_level) {
  if (total_steps < 2) throw Error("diffusion steps must be at least 2");
  const std::vector<int> divisors = multi_level ? std::vector<int>{20, 10, 5, 2} : std::vector<int>{2};
  std::vector<int> steps;
  for (int div : divisors) {
    const int t = std::max(1, static_cast<int>(std::lround(static_cast<double>(total_steps) / div)));
    steps.push_back(t);
  }
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  return steps;
}

double hardness_level(int t) {
  if (t < 1) throw Error("hardness level needs t >= 1, got " + std::to_string(t));
  return 1.0 / static_cast<double>(t);
}

double level_margin(int t, int total_steps, double gamma_min, double gamma_max) {
  if (total_steps < 2 || t < 1 || t > total_steps)
    throw Error("level_margin: step " + std::to_string(t) + " outside [1, " +
                std::to_string(total_steps) + "]");
  if (!(gamma_min < gamma_max)) throw Error("level_margin: gamma_min must be below gamma_max");
  return gamma_min + (gamma_max - gamma_min) * static_cast<double>(t - 1) /
                         static_cast<double>(total_steps - 1);
}

namespace {

double triangle(int t, int total_steps) {
  const double half = static_cast<double>(total_steps) / 2.0;
  return 1.0 - std::abs(static_cast<double>(t) - half) / half;
}

}  // namespace

double level_weight(int t, int total_steps, std::span<const int> steps) {
  if (std::find(steps.begin(), steps.end(), t) == steps.end())
    throw Error("level_weight: step " + std::to_string(t) + " is not in the step set");
  double sum = 0.0;
  for (int s : steps) sum += triangle(s, total_steps);
  if (sum <= 0.0) return 1.0 / static_cast<double>(steps.size());
  return triangle(t, total_steps) / sum;
}

double NegativeBundle::weighted_margin() const {
  double m = 0.0;
  for (const auto& e : entries) m += e.weight * e.margin;
  return m;
}

void validate_steps(std::span<const int> steps, int total_steps) {
  if (steps.empty()) throw Error("generation step set is empty");
  for (int t : steps)
    if (t < 1 || t > total_steps)
      throw Error("generation step " + std::to_string(t) + " outside [1, " +
                  std::to_string(total_steps) + "]");
}

std::vector<NegativeBundle> generate_bundles(const Denoiser& denoiser, const NoiseSchedule& s,
                                             const EmbeddingSpace& space,
                                             std::span<const Triple> triples, Side side,
                                             const GenerationOptions& opt, std::span<Rng> rngs) {
  validate_steps(opt.steps, s.steps);
  check_dim("generate_bundles rng count", static_cast<Eigen::Index>(triples.size()),
            static_cast<Eigen::Index>(rngs.size()));
  check_dim("generate_bundles denoiser width", space.dim, denoiser.dim);

  std::vector<int> steps = opt.steps;
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());

  const auto n = static_cast<Eigen::Index>(triples.size());
  std::vector<NegativeBundle> bundles(triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i) {
    auto& b = bundles[i];
    b.positive = triples[i];
    b.side = side;
    for (int t : steps) {
      GeneratedNegative g;
      g.step = t;
      g.hardness = hardness_level(t);
      g.weight = level_weight(t, s.steps, steps);
      g.margin = level_margin(t, s.steps, opt.gamma_min, opt.gamma_max);
      b.entries.push_back(std::move(g));
    }
  }

  // Each triple's stream seeds one child stream per modality.
  std::array<std::vector<Rng>, 3> modality_rngs;
  for (auto& r : rngs)
    for (auto& per_modality : modality_rngs) per_modality.emplace_back(r.next_u64());

  for (Modality m : kModalities) {
    Mat conditions = Mat::Zero(n, space.dim);
    if (opt.use_condition) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const Triple& tr = triples[static_cast<std::size_t>(i)];
        const EntityId observed = side == Side::tail ? tr.head : tr.tail;
        conditions.row(i) = condition_for(space.kind, side, space.modality_embed(observed, m),
                                          space.relation_embedding(tr.relation))
                                .transpose();
      }
    }
    const auto states = run_reverse_chains(denoiser, m, s, conditions, steps,
                                           modality_rngs[static_cast<std::size_t>(m)], opt.reverse);
    for (std::size_t k = 0; k < steps.size(); ++k)
      for (Eigen::Index i = 0; i < n; ++i)
        bundles[static_cast<std::size_t>(i)].entries[k].embedding[static_cast<std::size_t>(m)] =
            states[k].row(i).transpose();
  }
  return bundles;
}

NegativeBundle generate_bundle(const Denoiser& denoiser, const NoiseSchedule& s,
                               const EmbeddingSpace& space, const Triple& triple, Side side,
                               const GenerationOptions& opt, Rng& rng) {
  return generate_bundles(denoiser, s, space, std::span<const Triple>(&triple, 1), side, opt,
                          std::span<Rng>(&rng, 1))
      .front();
}

Triple SampledNegatives::corrupted(std::size_t i) const {
  Triple t = positive;
  (side == Side::head ? t.head : t.tail) = entities.at(i);
  return t;
}

SampledNegatives sample_uniform(std::int32_t num_entities, const Triple& triple, Side side, int k,
                                Rng& rng) {
  if (k < 1) throw Error("negative sample count must be at least 1, got " + std::to_string(k));
  if (num_entities < 2) throw Error("uniform negative sampling needs at least 2 entities");
  const EntityId original = side == Side::head ? triple.head : triple.tail;
  SampledNegatives s{triple, side, {}};
  s.entities.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    auto e = static_cast<EntityId>(rng.below(static_cast<std::uint64_t>(num_entities - 1)));
    if (e >= original) ++e;
    s.entities.push_back(e);
  }
  return s;
}

SampledNegatives sample_bernoulli(std::int32_t num_entities, const BernoulliStats& stats,
                                  const Triple& triple, int k, Rng& rng) {
  const Side side = rng.uniform() < stats.head_probability(triple.relation) ? Side::head : Side::tail;
  return sample_uniform(num_entities, triple, side, k, rng);
}

}  // namespace dhns
