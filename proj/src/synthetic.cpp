#include "dhns/synthetic.hpp"

#include <algorithm>
#include <memory>
#include <set>

#include "dhns/rng.hpp"

namespace dhns {

namespace {

std::string padded(const char* prefix, int i, int width) {
  std::string digits_str = std::to_string(i);
  if (static_cast<int>(digits_str.size()) < width)
    digits_str.insert(0, static_cast<std::size_t>(width) - digits_str.size(), '0');
  return prefix + digits_str;
}

int digits(int n) {
  int d = 1;
  while (n >= 10) {
    n /= 10;
    ++d;
  }
  return d;
}

std::shared_ptr<const ModalityFeatures> clustered_features(const std::vector<int>& cluster,
                                                           int clusters, int dim, double noise,
                                                           double masked_fraction, Rng& rng) {
  Mat centroids(clusters, dim);
  for (Eigen::Index i = 0; i < centroids.size(); ++i) centroids.data()[i] = rng.normal();
  auto f = std::make_shared<ModalityFeatures>();
  const auto n = static_cast<Eigen::Index>(cluster.size());
  f->values.resize(n, dim);
  f->present.assign(cluster.size(), true);
  for (Eigen::Index e = 0; e < n; ++e) {
    for (int j = 0; j < dim; ++j)
      f->values(e, j) = centroids(cluster[static_cast<std::size_t>(e)], j) + noise * rng.normal();
    // Round-trip through float so in-memory and on-disk datasets agree.
    for (int j = 0; j < dim; ++j) f->values(e, j) = static_cast<double>(static_cast<float>(f->values(e, j)));
  }
  for (Eigen::Index e = 0; e < n; ++e) {
    if (rng.uniform() < masked_fraction) {
      f->present[static_cast<std::size_t>(e)] = false;
      f->values.row(e).setZero();
    }
  }
  return f;
}

}  // namespace

bool SyntheticDataset::follows_rule(const Triple& t) const {
  const int hc = cluster.at(static_cast<std::size_t>(t.head));
  return cluster.at(static_cast<std::size_t>(t.tail)) ==
         rule.at(static_cast<std::size_t>(t.relation)).at(static_cast<std::size_t>(hc));
}

SyntheticDataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.entities < 2) throw Error("synthetic dataset needs at least 2 entities");
  if (spec.relations < 1) throw Error("synthetic dataset needs at least 1 relation");
  if (spec.triples < 1) throw Error("synthetic dataset needs at least 1 triple");
  if (spec.visual_dim < 1 || spec.textual_dim < 1)
    throw Error("synthetic feature widths must be at least 1");
  const long long capacity = static_cast<long long>(spec.entities) * (spec.entities - 1) * spec.relations;
  if (spec.triples > capacity / 2)
    throw Error("too many triples requested for the entity/relation counts");

  Rng rng(spec.seed);
  SyntheticDataset out;
  Mmkg& kg = out.kg;
  const int clusters = spec.clusters > 0 ? spec.clusters : std::max(2, spec.entities / 10);

  for (int e = 0; e < spec.entities; ++e) kg.entities.add(padded("e", e, digits(spec.entities - 1)));
  for (int r = 0; r < spec.relations; ++r) kg.relations.add(padded("r", r, digits(spec.relations - 1)));

  // Balanced cluster assignment in a shuffled order.
  out.cluster.resize(static_cast<std::size_t>(spec.entities));
  std::vector<int> perm(static_cast<std::size_t>(spec.entities));
  for (int i = 0; i < spec.entities; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  std::vector<std::vector<EntityId>> members(static_cast<std::size_t>(clusters));
  for (int i = 0; i < spec.entities; ++i) {
    const int c = i % clusters;
    out.cluster[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = c;
    members[static_cast<std::size_t>(c)].push_back(perm[static_cast<std::size_t>(i)]);
  }
  for (auto& m : members) std::sort(m.begin(), m.end());

  out.rule.resize(static_cast<std::size_t>(spec.relations));
  for (auto& rule : out.rule) {
    rule.resize(static_cast<std::size_t>(clusters));
    for (int c = 0; c < clusters; ++c) rule[static_cast<std::size_t>(c)] = c;
    for (std::size_t i = rule.size(); i > 1; --i) std::swap(rule[i - 1], rule[rng.below(i)]);
  }

  std::set<Triple> seen;
  std::vector<Triple> triples;
  const long long max_attempts = 200LL * spec.triples + 10000;
  for (long long attempt = 0; static_cast<int>(triples.size()) < spec.triples; ++attempt) {
    if (attempt > max_attempts) throw Error("could not draw enough distinct triples");
    Triple t;
    t.head = static_cast<EntityId>(rng.below(static_cast<std::uint64_t>(spec.entities)));
    t.relation = static_cast<RelationId>(rng.below(static_cast<std::uint64_t>(spec.relations)));
    if (rng.uniform() < spec.rule_fidelity) {
      const int target = out.rule[static_cast<std::size_t>(t.relation)]
                                 [static_cast<std::size_t>(out.cluster[static_cast<std::size_t>(t.head)])];
      const auto& pool = members[static_cast<std::size_t>(target)];
      t.tail = pool[rng.below(pool.size())];
    } else {
      t.tail = static_cast<EntityId>(rng.below(static_cast<std::uint64_t>(spec.entities)));
    }
    if (t.tail == t.head || !seen.insert(t).second) continue;
    triples.push_back(t);
  }

  const auto n = triples.size();
  const auto n_test = static_cast<std::size_t>(spec.test_fraction * static_cast<double>(n));
  const auto n_valid = static_cast<std::size_t>(spec.valid_fraction * static_cast<double>(n));
  kg.test.assign(triples.begin(), triples.begin() + static_cast<std::ptrdiff_t>(n_test));
  kg.valid.assign(triples.begin() + static_cast<std::ptrdiff_t>(n_test),
                  triples.begin() + static_cast<std::ptrdiff_t>(n_test + n_valid));
  kg.train.assign(triples.begin() + static_cast<std::ptrdiff_t>(n_test + n_valid), triples.end());

  Rng feature_rng = rng.substream(1);
  kg.visual = clustered_features(out.cluster, clusters, spec.visual_dim, spec.feature_noise,
                                 spec.masked_fraction, feature_rng);
  kg.textual = clustered_features(out.cluster, clusters, spec.textual_dim, spec.feature_noise,
                                  spec.masked_fraction, feature_rng);
  kg.validate();
  return out;
}

}  // namespace dhns
