#pragma once

#include <array>
#include <span>
#include <vector>

#include "dhns/diffusion.hpp"
#include "dhns/kg.hpp"
#include "dhns/kge.hpp"
#include "dhns/rng.hpp"

namespace dhns {

// {T/20, T/10, T/5, T/2} rounded to the nearest integer (at least 1),
// de-duplicated, ascending. With multi_level = false only {T/2}.
std::vector<int> default_steps(int total_steps, bool multi_level = true);

// Hardness of an embedding harvested at step t: 1/t.
double hardness_level(int t);

// gamma_min + (gamma_max - gamma_min) * (t - 1) / (T - 1)
double level_margin(int t, int total_steps, double gamma_min, double gamma_max);

// Triangular weight u(t) = 1 - |t - T/2| / (T/2) normalized over `steps`.
// If every u(s) is zero (steps == {T}) the weights are uniform.
double level_weight(int t, int total_steps, std::span<const int> steps);

struct GeneratedNegative {
  int step = 0;
  double hardness = 0.0;
  double weight = 0.0;
  double margin = 0.0;
  std::array<Vec, 3> embedding;  // indexed by Modality
};

// Generated replacements for one side of one positive triple, ascending step.
struct NegativeBundle {
  Triple positive;
  Side side = Side::tail;
  std::vector<GeneratedNegative> entries;

  // Sum over entries of weight * margin.
  double weighted_margin() const;
};

struct GenerationOptions {
  std::vector<int> steps;
  double gamma_min = 1.0;
  double gamma_max = 2.0;
  // false replaces the multimodal condition by the zero vector.
  bool use_condition = true;
  ReverseOptions reverse;
};

void validate_steps(std::span<const int> steps, int total_steps);

// One reverse chain per (triple, modality) conditioned on the observed
// entity's modality embedding and the relation. rngs[i] supplies all the
// noise for triples[i].
std::vector<NegativeBundle> generate_bundles(const Denoiser& denoiser, const NoiseSchedule& s,
                                             const EmbeddingSpace& space,
                                             std::span<const Triple> triples, Side side,
                                             const GenerationOptions& opt, std::span<Rng> rngs);

NegativeBundle generate_bundle(const Denoiser& denoiser, const NoiseSchedule& s,
                               const EmbeddingSpace& space, const Triple& triple, Side side,
                               const GenerationOptions& opt, Rng& rng);

// Corrupted entities for one positive triple, all on the same side.
struct SampledNegatives {
  Triple positive;
  Side side = Side::tail;
  std::vector<EntityId> entities;

  Triple corrupted(std::size_t i) const;
};

// k entities drawn uniformly from all entities except the one being replaced.
SampledNegatives sample_uniform(std::int32_t num_entities, const Triple& triple, Side side, int k,
                                Rng& rng);

// Corrupts the head with probability tph / (tph + hpt), else the tail; the
// replacement is drawn as in sample_uniform.
SampledNegatives sample_bernoulli(std::int32_t num_entities, const BernoulliStats& stats,
                                  const Triple& triple, int k, Rng& rng);

}  // namespace dhns
