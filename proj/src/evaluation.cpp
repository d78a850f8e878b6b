#include "dhns/evaluation.hpp"

#include <array>
#include <cstdio>
#include <sstream>
#include <vector>

#include "dhns/parallel.hpp"

namespace dhns {

namespace {

// Entity embeddings of every modality, materialized once per evaluation.
class CandidateScorer {
 public:
  CandidateScorer(const EmbeddingSpace& space, bool joint) : space_(space), joint_(joint) {
    const auto n = space.num_entities();
    const int modalities = joint ? 3 : 1;
    for (int m = 0; m < modalities; ++m) {
      tables_[static_cast<std::size_t>(m)].resize(n, space.dim);
      for (EntityId e = 0; e < n; ++e)
        tables_[static_cast<std::size_t>(m)].row(e) =
            space.modality_embed(e, static_cast<Modality>(m)).transpose();
    }
  }

  // Energies of (h, r, e) or (e, r, t) for every candidate e.
  std::vector<double> score_all(const Triple& truth, Side predict) const {
    const Vec r = space_.relation_embedding(truth.relation);
    const auto n = space_.num_entities();
    std::vector<double> scores(static_cast<std::size_t>(n), 0.0);
    const int modalities = joint_ ? 3 : 1;
    for (int m = 0; m < modalities; ++m) {
      const Mat& table = tables_[static_cast<std::size_t>(m)];
      const Vec fixed = table.row(predict == Side::tail ? truth.head : truth.tail).transpose();
      for (EntityId e = 0; e < n; ++e) {
        const Vec cand = table.row(e).transpose();
        scores[static_cast<std::size_t>(e)] += predict == Side::tail
                                                   ? energy(space_.kind, fixed, r, cand)
                                                   : energy(space_.kind, cand, r, fixed);
      }
    }
    if (joint_)
      for (auto& s : scores) s /= 3.0;
    return scores;
  }

 private:
  const EmbeddingSpace& space_;
  bool joint_;
  std::array<Mat, 3> tables_;
};

double rank_from_scores(const std::vector<double>& scores, EntityId truth,
                        const std::vector<EntityId>* filtered) {
  const double target = scores[static_cast<std::size_t>(truth)];
  std::size_t better = 0;
  std::size_t ties = 0;
  std::size_t f = 0;
  for (std::size_t e = 0; e < scores.size(); ++e) {
    if (static_cast<EntityId>(e) == truth) continue;
    if (filtered) {
      while (f < filtered->size() && (*filtered)[f] < static_cast<EntityId>(e)) ++f;
      if (f < filtered->size() && (*filtered)[f] == static_cast<EntityId>(e)) continue;
    }
    if (scores[e] < target)
      ++better;
    else if (scores[e] == target)
      ++ties;
  }
  return 1.0 + static_cast<double>(better) + static_cast<double>(ties) / 2.0;
}

void check_query(const EmbeddingSpace& space, const Triple& t) {
  if (t.head < 0 || t.head >= space.num_entities() || t.tail < 0 ||
      t.tail >= space.num_entities() || t.relation < 0 || t.relation >= space.num_relations())
    throw Error("query references an invalid entity or relation id");
}

double filtered_rank(const CandidateScorer& scorer, const FilterIndex& filter, const Triple& truth,
                     Side predict) {
  const auto scores = scorer.score_all(truth, predict);
  const auto& observed = predict == Side::tail ? filter.tails(truth.head, truth.relation)
                                               : filter.heads(truth.relation, truth.tail);
  return rank_from_scores(scores, predict == Side::tail ? truth.tail : truth.head, &observed);
}

}  // namespace

double rank_query(const EmbeddingSpace& space, const FilterIndex& filter, const Triple& truth,
                  Side predict, const EvalOptions& opt) {
  check_query(space, truth);
  const CandidateScorer scorer(space, opt.joint);
  return filtered_rank(scorer, filter, truth, predict);
}

double raw_rank_query(const EmbeddingSpace& space, const Triple& truth, Side predict,
                      const EvalOptions& opt) {
  check_query(space, truth);
  const CandidateScorer scorer(space, opt.joint);
  return rank_from_scores(scorer.score_all(truth, predict),
                          predict == Side::tail ? truth.tail : truth.head, nullptr);
}

MetricSummary summarize_ranks(std::span<const double> ranks) {
  MetricSummary s;
  s.queries = ranks.size();
  if (ranks.empty()) return s;
  for (double r : ranks) {
    s.mrr += 1.0 / r;
    s.hits1 += r <= 1.0 ? 1.0 : 0.0;
    s.hits3 += r <= 3.0 ? 1.0 : 0.0;
    s.hits10 += r <= 10.0 ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(ranks.size());
  s.mrr /= n;
  s.hits1 /= n;
  s.hits3 /= n;
  s.hits10 /= n;
  return s;
}

EvalResult evaluate_triples(const EmbeddingSpace& space, const FilterIndex& filter,
                            std::span<const Triple> triples, const EvalOptions& opt) {
  if (triples.empty()) throw Error("cannot evaluate an empty split");
  for (const auto& t : triples) check_query(space, t);
  const CandidateScorer scorer(space, opt.joint);
  std::vector<double> head_ranks(triples.size());
  std::vector<double> tail_ranks(triples.size());
  parallel_for(triples.size(), opt.threads, [&](std::size_t i) {
    head_ranks[i] = filtered_rank(scorer, filter, triples[i], Side::head);
    tail_ranks[i] = filtered_rank(scorer, filter, triples[i], Side::tail);
  });

  std::vector<double> all;
  all.reserve(2 * triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i) {
    all.push_back(head_ranks[i]);
    all.push_back(tail_ranks[i]);
  }
  const MetricSummary overall = summarize_ranks(all);
  EvalResult r;
  r.mrr = overall.mrr;
  r.hits1 = overall.hits1;
  r.hits3 = overall.hits3;
  r.hits10 = overall.hits10;
  r.queries = overall.queries;
  r.head = summarize_ranks(head_ranks);
  r.tail = summarize_ranks(tail_ranks);
  return r;
}

EvalResult evaluate(const EmbeddingSpace& space, const Mmkg& kg, const FilterIndex& filter,
                    const std::string& split, const EvalOptions& opt) {
  return evaluate_triples(space, filter, kg.split(split), opt);
}

nlohmann::json to_json(const EvalResult& r) {
  const auto summary = [](const MetricSummary& s) {
    return nlohmann::json{{"mrr", s.mrr},     {"hits1", s.hits1},   {"hits3", s.hits3},
                          {"hits10", s.hits10}, {"queries", s.queries}};
  };
  return {{"mrr", r.mrr},
          {"hits1", r.hits1},
          {"hits3", r.hits3},
          {"hits10", r.hits10},
          {"queries", r.queries},
          {"head", summary(r.head)},
          {"tail", summary(r.tail)}};
}

std::string format_table(const EvalResult& r) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-10s %8s %8s %8s %8s\n", "direction", "MRR", "H@1", "H@3",
                "H@10");
  out << line;
  const auto row = [&](const char* name, double mrr, double h1, double h3, double h10) {
    std::snprintf(line, sizeof(line), "%-10s %8.2f %8.2f %8.2f %8.2f\n", name, 100 * mrr, 100 * h1,
                  100 * h3, 100 * h10);
    out << line;
  };
  row("head", r.head.mrr, r.head.hits1, r.head.hits3, r.head.hits10);
  row("tail", r.tail.mrr, r.tail.hits1, r.tail.hits3, r.tail.hits10);
  row("both", r.mrr, r.hits1, r.hits3, r.hits10);
  return out.str();
}

}  // namespace dhns
