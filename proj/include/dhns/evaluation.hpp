#pragma once

#include <cstddef>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "dhns/kg.hpp"
#include "dhns/kge.hpp"

namespace dhns {

struct MetricSummary {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  std::size_t queries = 0;
};

struct EvalResult {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  std::size_t queries = 0;
  MetricSummary head;  // (?, r, t) queries
  MetricSummary tail;  // (h, r, ?) queries
};

struct EvalOptions {
  // Score candidates by the mean of the three modality energies instead of
  // the structural energy alone.
  bool joint = false;
  int threads = 1;
};

// Filtered rank of the true entity for the query that hides `predict`.
// Candidates whose completed triple is observed in any split are skipped
// (except the truth). Ties count half: 1 + #better + #tied / 2.
double rank_query(const EmbeddingSpace& space, const FilterIndex& filter, const Triple& truth,
                  Side predict, const EvalOptions& opt = {});

// Same ranking without the filter.
double raw_rank_query(const EmbeddingSpace& space, const Triple& truth, Side predict,
                      const EvalOptions& opt = {});

MetricSummary summarize_ranks(std::span<const double> ranks);

EvalResult evaluate(const EmbeddingSpace& space, const Mmkg& kg, const FilterIndex& filter,
                    const std::string& split, const EvalOptions& opt = {});

EvalResult evaluate_triples(const EmbeddingSpace& space, const FilterIndex& filter,
                            std::span<const Triple> triples, const EvalOptions& opt = {});

nlohmann::json to_json(const EvalResult& r);
// Aligned table, metrics as percentages with two decimals.
std::string format_table(const EvalResult& r);

}  // namespace dhns
