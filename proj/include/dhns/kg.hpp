#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dhns/types.hpp"

namespace dhns {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  auto operator<=>(const Triple&) const = default;
};

// Name <-> dense id, ids assigned in insertion order.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> names);

  std::int32_t add(const std::string& name);
  std::optional<std::int32_t> find(const std::string& name) const;
  const std::string& name(std::int32_t id) const { return names_.at(static_cast<std::size_t>(id)); }
  std::int32_t size() const { return static_cast<std::int32_t>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

// Frozen per-entity feature rows of one modality. Rows of entities without
// the modality are zero and flagged absent.
struct ModalityFeatures {
  Mat values;                 // n_entities x dim
  std::vector<bool> present;  // n_entities

  Eigen::Index dim() const { return values.cols(); }
  Eigen::Index rows() const { return values.rows(); }
  std::vector<std::int64_t> masked_rows() const;
};

struct Mmkg {
  Vocabulary entities;
  Vocabulary relations;
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
  std::shared_ptr<const ModalityFeatures> visual;
  std::shared_ptr<const ModalityFeatures> textual;
  std::vector<std::string> warnings;

  std::int32_t num_entities() const { return entities.size(); }
  std::int32_t num_relations() const { return relations.size(); }
  const std::vector<Triple>& split(const std::string& name) const;

  // Throws DatasetError when an invariant is broken: ids out of range,
  // overlapping splits, feature row counts.
  void validate() const;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

// Reads entities.txt, relations.txt, {train,valid,test}.tsv,
// {visual,textual}.f32 with their .json sidecars.
Mmkg load_mmkg(const std::filesystem::path& dir);

// Writes the same layout load_mmkg reads.
void save_mmkg(const Mmkg& kg, const std::filesystem::path& dir);

// Observed (h, r) -> tails and (r, t) -> heads over all splits.
class FilterIndex {
 public:
  FilterIndex() = default;
  explicit FilterIndex(const Mmkg& kg);

  bool contains(const Triple& t) const;
  const std::vector<EntityId>& tails(EntityId head, RelationId relation) const;
  const std::vector<EntityId>& heads(RelationId relation, EntityId tail) const;
  std::size_t size() const { return count_; }

 private:
  static std::uint64_t key(std::int32_t a, std::int32_t b);
  std::unordered_map<std::uint64_t, std::vector<EntityId>> tails_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> heads_;
  std::size_t count_ = 0;
};

FilterIndex build_filter_index(const Mmkg& kg);

// Per-relation tails-per-head and heads-per-tail averages over the train split.
struct BernoulliStats {
  std::vector<double> tph;
  std::vector<double> hpt;

  // Probability of corrupting the head: tph / (tph + hpt). 0.5 for relations
  // absent from train.
  double head_probability(RelationId r) const;
};

BernoulliStats bernoulli_stats(const Mmkg& kg);

}  // namespace dhns
