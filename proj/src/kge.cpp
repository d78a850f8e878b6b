#include "dhns/kge.hpp"

#include <cmath>
#include <numbers>

namespace dhns {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::translation: return "translation";
    case ModelKind::bilinear: return "bilinear";
    case ModelKind::rotation: return "rotation";
  }
  return "?";
}

std::string to_string(Modality m) {
  switch (m) {
    case Modality::structural: return "struc";
    case Modality::visual: return "vis";
    case Modality::textual: return "text";
  }
  return "?";
}

std::string to_string(Side s) { return s == Side::head ? "head" : "tail"; }

ModelKind parse_model_kind(const std::string& name) {
  if (name == "translation" || name == "transe") return ModelKind::translation;
  if (name == "bilinear" || name == "distmult") return ModelKind::bilinear;
  if (name == "rotation" || name == "rotate") return ModelKind::rotation;
  throw Error("unknown model kind '" + name + "'");
}

namespace {

void check_triple_dims(ModelKind kind, const VecRef& h, const VecRef& r, const VecRef& t) {
  check_dim("energy relation", h.size(), r.size());
  check_dim("energy tail", h.size(), t.size());
  if (kind == ModelKind::rotation && h.size() % 2 != 0)
    throw DimensionError("rotation embedding must have even length", h.size() + 1, h.size());
}

}  // namespace

Vec complex_multiply(const VecRef& a, const VecRef& b) {
  check_dim("complex_multiply", a.size(), b.size());
  if (a.size() % 2 != 0) throw DimensionError("complex vector must have even length", a.size() + 1, a.size());
  Vec out(a.size());
  for (Eigen::Index i = 0; i < a.size(); i += 2) {
    out[i] = a[i] * b[i] - a[i + 1] * b[i + 1];
    out[i + 1] = a[i] * b[i + 1] + a[i + 1] * b[i];
  }
  return out;
}

Vec complex_conjugate(const VecRef& a) {
  Vec out = a;
  for (Eigen::Index i = 1; i < a.size(); i += 2) out[i] = -a[i];
  return out;
}

Vec phases_to_unit_complex(const VecRef& phases) {
  Vec out(2 * phases.size());
  for (Eigen::Index i = 0; i < phases.size(); ++i) {
    out[2 * i] = std::cos(phases[i]);
    out[2 * i + 1] = std::sin(phases[i]);
  }
  return out;
}

double energy(ModelKind kind, const VecRef& h, const VecRef& r, const VecRef& t) {
  check_triple_dims(kind, h, r, t);
  const Eigen::Index n = h.size();
  switch (kind) {
    case ModelKind::translation: {
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = h[i] + r[i] - t[i];
        s += d * d;
      }
      return std::sqrt(s);
    }
    case ModelKind::rotation: {
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; i += 2) {
        const double re = h[i] * r[i] - h[i + 1] * r[i + 1] - t[i];
        const double im = h[i] * r[i + 1] + h[i + 1] * r[i] - t[i + 1];
        s += re * re + im * im;
      }
      return std::sqrt(s);
    }
    case ModelKind::bilinear: {
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) s += h[i] * r[i] * t[i];
      return -s;
    }
  }
  return 0.0;
}

EnergyGradient energy_gradient(ModelKind kind, const VecRef& h, const VecRef& r, const VecRef& t) {
  check_triple_dims(kind, h, r, t);
  const Eigen::Index n = h.size();
  EnergyGradient g;
  switch (kind) {
    case ModelKind::translation: {
      const Vec diff = h + r - t;
      g.value = diff.norm();
      const Vec u = g.value > 0.0 ? Vec(diff / g.value) : Vec(Vec::Zero(n));
      g.head = u;
      g.relation = u;
      g.tail = -u;
      break;
    }
    case ModelKind::rotation: {
      const Vec diff = complex_multiply(h, r) - t;
      g.value = diff.norm();
      const Vec u = g.value > 0.0 ? Vec(diff / g.value) : Vec(Vec::Zero(n));
      g.head.resize(n);
      g.relation.resize(n);
      for (Eigen::Index i = 0; i < n; i += 2) {
        g.head[i] = u[i] * r[i] + u[i + 1] * r[i + 1];
        g.head[i + 1] = -u[i] * r[i + 1] + u[i + 1] * r[i];
        g.relation[i] = u[i] * h[i] + u[i + 1] * h[i + 1];
        g.relation[i + 1] = -u[i] * h[i + 1] + u[i + 1] * h[i];
      }
      g.tail = -u;
      break;
    }
    case ModelKind::bilinear: {
      g.value = energy(kind, h, r, t);
      g.head = -(r.cwiseProduct(t));
      g.relation = -(h.cwiseProduct(t));
      g.tail = -(h.cwiseProduct(r));
      break;
    }
  }
  return g;
}

Vec condition(ModelKind kind, const VecRef& x_e, const VecRef& x_r) {
  check_dim("condition", x_e.size(), x_r.size());
  switch (kind) {
    case ModelKind::rotation: return complex_multiply(x_e, x_r);
    case ModelKind::bilinear: return x_e.cwiseProduct(x_r);
    case ModelKind::translation: return x_e + x_r;
  }
  return {};
}

Vec condition_for_head(ModelKind kind, const VecRef& x_t, const VecRef& x_r) {
  check_dim("condition", x_t.size(), x_r.size());
  switch (kind) {
    case ModelKind::rotation: return complex_multiply(x_t, complex_conjugate(x_r));
    case ModelKind::bilinear: return x_t.cwiseProduct(x_r);
    case ModelKind::translation: return x_t - x_r;
  }
  return {};
}

Vec condition_for(ModelKind kind, Side generated, const VecRef& observed, const VecRef& x_r) {
  return generated == Side::tail ? condition(kind, observed, x_r)
                                 : condition_for_head(kind, observed, x_r);
}

EmbeddingSpace EmbeddingSpace::zeros(ModelKind kind, int dim, std::int32_t n_entities,
                                     std::int32_t n_relations,
                                     std::shared_ptr<const ModalityFeatures> visual,
                                     std::shared_ptr<const ModalityFeatures> textual) {
  if (dim < 1) throw Error("embedding dimension must be positive");
  if (kind == ModelKind::rotation && dim % 2 != 0)
    throw Error("rotation model needs an even embedding dimension, got " + std::to_string(dim));
  if (!visual || !textual) throw Error("embedding space needs visual and textual features");
  EmbeddingSpace s;
  s.kind = kind;
  s.dim = dim;
  s.entity = Mat::Zero(n_entities, dim);
  s.relation = Mat::Zero(n_relations, kind == ModelKind::rotation ? dim / 2 : dim);
  s.visual_weight = Mat::Zero(dim, visual->dim());
  s.visual_bias = Vec::Zero(dim);
  s.visual_absent = Vec::Zero(dim);
  s.textual_weight = Mat::Zero(dim, textual->dim());
  s.textual_bias = Vec::Zero(dim);
  s.textual_absent = Vec::Zero(dim);
  s.visual_features = std::move(visual);
  s.textual_features = std::move(textual);
  return s;
}

EmbeddingSpace EmbeddingSpace::init(ModelKind kind, int dim, const Mmkg& kg, Rng& rng) {
  EmbeddingSpace s =
      zeros(kind, dim, kg.num_entities(), kg.num_relations(), kg.visual, kg.textual);
  const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
  const auto fill = [&rng](double* data, Eigen::Index n, double lo, double hi) {
    for (Eigen::Index i = 0; i < n; ++i) data[i] = rng.uniform(lo, hi);
  };
  fill(s.entity.data(), s.entity.size(), -bound, bound);
  if (kind == ModelKind::rotation)
    fill(s.relation.data(), s.relation.size(), -std::numbers::pi, std::numbers::pi);
  else
    fill(s.relation.data(), s.relation.size(), -bound, bound);
  const double vb = 1.0 / std::sqrt(static_cast<double>(s.visual_weight.cols()));
  fill(s.visual_weight.data(), s.visual_weight.size(), -vb, vb);
  fill(s.visual_bias.data(), s.visual_bias.size(), -vb, vb);
  fill(s.visual_absent.data(), s.visual_absent.size(), -bound, bound);
  const double tb = 1.0 / std::sqrt(static_cast<double>(s.textual_weight.cols()));
  fill(s.textual_weight.data(), s.textual_weight.size(), -tb, tb);
  fill(s.textual_bias.data(), s.textual_bias.size(), -tb, tb);
  fill(s.textual_absent.data(), s.textual_absent.size(), -bound, bound);
  return s;
}

EmbeddingSpace EmbeddingSpace::zeros_like() const {
  return zeros(kind, dim, num_entities(), num_relations(), visual_features, textual_features);
}

Vec EmbeddingSpace::relation_embedding(RelationId r) const {
  if (r < 0 || r >= num_relations()) throw Error("invalid relation id " + std::to_string(r));
  if (kind == ModelKind::rotation) return phases_to_unit_complex(relation.row(r).transpose());
  return relation.row(r).transpose();
}

Vec EmbeddingSpace::modality_embed(EntityId e, Modality m) const {
  if (e < 0 || e >= num_entities()) throw Error("invalid entity id " + std::to_string(e));
  switch (m) {
    case Modality::structural: return entity.row(e).transpose();
    case Modality::visual:
      if (!visual_features->present[static_cast<std::size_t>(e)]) return visual_absent;
      return visual_weight * visual_features->values.row(e).transpose() + visual_bias;
    case Modality::textual:
      if (!textual_features->present[static_cast<std::size_t>(e)]) return textual_absent;
      return textual_weight * textual_features->values.row(e).transpose() + textual_bias;
  }
  return {};
}

std::vector<TensorRef> EmbeddingSpace::tensors() {
  return {tensor_ref("entity", entity),
          tensor_ref("relation", relation),
          tensor_ref("visual.weight", visual_weight),
          tensor_ref("visual.bias", visual_bias),
          tensor_ref("visual.absent", visual_absent),
          tensor_ref("textual.weight", textual_weight),
          tensor_ref("textual.bias", textual_bias),
          tensor_ref("textual.absent", textual_absent)};
}

void EmbeddingSpace::accumulate_entity(const EmbeddingSpace&, EntityId e, Modality m,
                                       const Vec& grad) {
  check_dim("entity gradient", dim, grad.size());
  switch (m) {
    case Modality::structural: entity.row(e) += grad.transpose(); break;
    case Modality::visual:
      if (!visual_features->present[static_cast<std::size_t>(e)]) {
        visual_absent += grad;
      } else {
        visual_weight.noalias() += grad * visual_features->values.row(e);
        visual_bias += grad;
      }
      break;
    case Modality::textual:
      if (!textual_features->present[static_cast<std::size_t>(e)]) {
        textual_absent += grad;
      } else {
        textual_weight.noalias() += grad * textual_features->values.row(e);
        textual_bias += grad;
      }
      break;
  }
}

void EmbeddingSpace::accumulate_relation(const EmbeddingSpace& params, RelationId r,
                                         const Vec& grad) {
  check_dim("relation gradient", dim, grad.size());
  if (kind != ModelKind::rotation) {
    relation.row(r) += grad.transpose();
    return;
  }
  // d(cos p, sin p)/dp = (-sin p, cos p)
  for (Eigen::Index i = 0; i < relation.cols(); ++i) {
    const double p = params.relation(r, i);
    relation(r, i) += -std::sin(p) * grad[2 * i] + std::cos(p) * grad[2 * i + 1];
  }
}

}  // namespace dhns
