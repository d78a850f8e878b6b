#pragma once

#include <cstdint>
#include <vector>

#include "dhns/kg.hpp"

namespace dhns {

// Desk-scale multimodal KG with planted structure. Entities belong to latent
// clusters; relation r maps cluster c to cluster rule[r][c]. Most triples
// follow the rule, the rest pick a random tail. Modality features are a
// per-cluster centroid plus Gaussian noise, so they carry link signal.
struct SyntheticSpec {
  int entities = 200;
  int relations = 10;
  int triples = 2000;
  int visual_dim = 16;
  int textual_dim = 24;
  std::uint64_t seed = 0;
  int clusters = 0;               // 0: entities / 10, at least 2
  double rule_fidelity = 0.95;    // share of triples drawn from the rule
  double feature_noise = 0.35;
  double masked_fraction = 0.02;  // per modality
  double valid_fraction = 0.1;
  double test_fraction = 0.1;
};

struct SyntheticDataset {
  Mmkg kg;
  std::vector<int> cluster;             // per entity
  std::vector<std::vector<int>> rule;   // [relation][cluster] -> tail cluster

  bool follows_rule(const Triple& t) const;
};

SyntheticDataset make_synthetic(const SyntheticSpec& spec);

}  // namespace dhns
