#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "dhns/kg.hpp"
#include "dhns/rng.hpp"
#include "dhns/types.hpp"

namespace dhns {

enum class ModelKind { translation, bilinear, rotation };
enum class Modality { structural = 0, visual = 1, textual = 2 };
enum class Side { head, tail };

inline constexpr std::array<Modality, 3> kModalities = {Modality::structural, Modality::visual,
                                                        Modality::textual};

std::string to_string(ModelKind kind);
std::string to_string(Modality m);  // "struc", "vis", "text"
std::string to_string(Side s);
ModelKind parse_model_kind(const std::string& name);

// Energy of a triple; lower is more plausible.
//   translation: ||h + r - t||
//   rotation:    ||h o r - t|| with h, r, t complex, interleaved (re, im)
//                and r of unit modulus
//   bilinear:    -sum_i h_i r_i t_i
double energy(ModelKind kind, const VecRef& h, const VecRef& r, const VecRef& t);

struct EnergyGradient {
  double value = 0.0;
  Vec head;
  Vec relation;
  Vec tail;
};

// Gradients of the norm energies at zero residual are taken as zero.
EnergyGradient energy_gradient(ModelKind kind, const VecRef& h, const VecRef& r, const VecRef& t);

// Condition for generating a tail from an observed head:
//   rotation x_e o x_r, bilinear x_e * x_r, translation x_e + x_r.
Vec condition(ModelKind kind, const VecRef& x_e, const VecRef& x_r);

// Condition for generating a head from an observed tail: the inverse of the
// kind's composition (x_t - x_r, x_t o conj(x_r)); bilinear is symmetric.
Vec condition_for_head(ModelKind kind, const VecRef& x_t, const VecRef& x_r);

Vec condition_for(ModelKind kind, Side generated, const VecRef& observed, const VecRef& x_r);

// Complex helpers on interleaved (re, im) vectors.
Vec complex_multiply(const VecRef& a, const VecRef& b);
Vec complex_conjugate(const VecRef& a);
Vec phases_to_unit_complex(const VecRef& phases);

// Trainable embedding tables plus projections of the frozen modality
// features. Gradients are accumulated in an instance with the same layout
// (see zeros_like).
struct EmbeddingSpace {
  ModelKind kind = ModelKind::rotation;
  int dim = 0;

  Mat entity;    // n_entities x dim
  Mat relation;  // n_relations x dim, or n_relations x dim/2 phases (rotation)
  Mat visual_weight;  // dim x visual feature width
  Vec visual_bias;
  Vec visual_absent;
  Mat textual_weight;  // dim x textual feature width
  Vec textual_bias;
  Vec textual_absent;

  std::shared_ptr<const ModalityFeatures> visual_features;
  std::shared_ptr<const ModalityFeatures> textual_features;

  // Entities and absent embeddings uniform in +-6/sqrt(dim); rotation phases
  // uniform in [-pi, pi]; projections uniform in +-1/sqrt(feature width).
  static EmbeddingSpace init(ModelKind kind, int dim, const Mmkg& kg, Rng& rng);
  static EmbeddingSpace zeros(ModelKind kind, int dim, std::int32_t n_entities,
                              std::int32_t n_relations,
                              std::shared_ptr<const ModalityFeatures> visual,
                              std::shared_ptr<const ModalityFeatures> textual);
  EmbeddingSpace zeros_like() const;

  std::int32_t num_entities() const { return static_cast<std::int32_t>(entity.rows()); }
  std::int32_t num_relations() const { return static_cast<std::int32_t>(relation.rows()); }

  // Relation vector as used by energy(): unit-modulus complex for rotation.
  Vec relation_embedding(RelationId r) const;
  Vec modality_embed(EntityId e, Modality m) const;

  std::vector<TensorRef> tensors();

  // Gradient accumulation; `this` holds gradients, `params` the values.
  void accumulate_entity(const EmbeddingSpace& params, EntityId e, Modality m, const Vec& grad);
  void accumulate_relation(const EmbeddingSpace& params, RelationId r, const Vec& grad);
};

}  // namespace dhns
