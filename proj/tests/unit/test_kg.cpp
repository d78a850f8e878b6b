#include <doctest.h>

#include <fstream>
#include <map>
#include <set>

#include "dhns/kg.hpp"
#include "dhns/rng.hpp"
#include "support/oracles.hpp"

using namespace dhns;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<ModalityFeatures> features(std::int32_t rows, Eigen::Index cols, Rng& rng,
                                           const std::vector<std::int32_t>& masked = {}) {
  auto f = std::make_shared<ModalityFeatures>();
  f->values.resize(rows, cols);
  for (Eigen::Index i = 0; i < f->values.size(); ++i)
    f->values.data()[i] = static_cast<float>(rng.normal());
  f->present.assign(static_cast<std::size_t>(rows), true);
  for (auto m : masked) {
    f->present[static_cast<std::size_t>(m)] = false;
    f->values.row(m).setZero();
  }
  return f;
}

Mmkg toy_kg() {
  Rng rng(1);
  Mmkg kg;
  for (const char* e : {"alice", "bob", "carol"}) kg.entities.add(e);
  kg.relations.add("knows");
  kg.train = {{0, 0, 1}, {1, 0, 2}};
  kg.visual = features(3, 2, rng);
  kg.textual = features(3, 3, rng);
  return kg;
}

Mmkg random_kg(std::int32_t entities, std::int32_t relations, std::size_t n_train,
               std::size_t n_valid, std::size_t n_test, Rng& rng) {
  Mmkg kg;
  for (std::int32_t i = 0; i < entities; ++i) kg.entities.add("ent" + std::to_string(i));
  for (std::int32_t i = 0; i < relations; ++i) kg.relations.add("rel" + std::to_string(i));
  std::set<Triple> seen;
  const auto draw = [&](std::size_t n, std::vector<Triple>& out) {
    while (out.size() < n) {
      const Triple t{static_cast<EntityId>(rng.below(static_cast<std::uint64_t>(entities))),
                     static_cast<RelationId>(rng.below(static_cast<std::uint64_t>(relations))),
                     static_cast<EntityId>(rng.below(static_cast<std::uint64_t>(entities)))};
      if (seen.insert(t).second) out.push_back(t);
    }
  };
  draw(n_train, kg.train);
  draw(n_valid, kg.valid);
  draw(n_test, kg.test);
  kg.visual = features(entities, 3, rng);
  kg.textual = features(entities, 2, rng);
  return kg;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_SUITE("kg-data") {
  TEST_CASE("toy dataset: 3 entities, 1 relation, 2 train triples") {
    oracle::TempDir dir("kg");
    save_mmkg(toy_kg(), dir.path);
    const Mmkg kg = load_mmkg(dir.path);
    CHECK(kg.num_entities() == 3);
    CHECK(kg.num_relations() == 1);
    CHECK(kg.train.size() == 2);
    CHECK(kg.valid.empty());
    CHECK(kg.entities.name(2) == "carol");
    CHECK(kg.train[1] == Triple{1, 0, 2});
    CHECK(kg.warnings.empty());
  }

  TEST_CASE("DB15K-sized dataset round-trips with its masked rows") {
    // DB15K: 12842 entities, 279 relations, 12818 with images, 9078 with
    // text, 79222 / 9902 / 9904 triples.
    Rng rng(2);
    Mmkg kg = random_kg(12842, 279, 79222, 9902, 9904, rng);
    std::vector<std::int32_t> no_image, no_text;
    for (std::int32_t i = 0; i < 12842 - 12818; ++i) no_image.push_back(i * 500);
    for (std::int32_t i = 0; i < 12842 - 9078; ++i) no_text.push_back(i * 3);
    kg.visual = features(12842, 2, rng, no_image);
    kg.textual = features(12842, 2, rng, no_text);
    oracle::TempDir dir("db15k");
    save_mmkg(kg, dir.path);
    const Mmkg back = load_mmkg(dir.path);
    CHECK(back.num_entities() == 12842);
    CHECK(back.num_relations() == 279);
    CHECK(back.train.size() == 79222);
    CHECK(back.valid.size() == 9902);
    CHECK(back.test.size() == 9904);
    const auto present = [](const ModalityFeatures& f) {
      return std::count(f.present.begin(), f.present.end(), true);
    };
    CHECK(present(*back.visual) == 12818);
    CHECK(present(*back.textual) == 9078);
  }

  TEST_CASE("entity missing a visual row is masked with a zero row and a warning") {
    Mmkg kg = toy_kg();
    Rng rng(3);
    kg.visual = features(3, 2, rng, {1});
    oracle::TempDir dir("mask");
    save_mmkg(kg, dir.path);
    const Mmkg back = load_mmkg(dir.path);
    CHECK_FALSE(back.visual->present[1]);
    CHECK(back.visual->present[0]);
    CHECK(back.visual->values.row(1).cwiseAbs().sum() == 0.0);
    REQUIRE(back.warnings.size() == 1);
    CHECK(back.warnings[0].find("visual") != std::string::npos);
    CHECK(back.visual->masked_rows() == std::vector<std::int64_t>{1});
  }

  TEST_CASE("masked rows listed in the sidecar are zeroed even when data is nonzero") {
    oracle::TempDir dir("mask2");
    save_mmkg(toy_kg(), dir.path);
    write_file(dir.path / "textual.json", R"({"rows": 3, "cols": 3, "masked_row_indices": [2]})");
    const Mmkg kg = load_mmkg(dir.path);
    CHECK(kg.textual->values.row(2).cwiseAbs().sum() == 0.0);
    CHECK(kg.visual->present[2]);
  }

  TEST_CASE("load errors: missing file, unknown names, row mismatch, overlap") {
    {
      oracle::TempDir dir("err");
      save_mmkg(toy_kg(), dir.path);
      fs::remove(dir.path / "valid.tsv");
      CHECK_THROWS_WITH_AS(load_mmkg(dir.path), doctest::Contains("valid.tsv"), DatasetError);
    }
    {
      oracle::TempDir dir("err");
      save_mmkg(toy_kg(), dir.path);
      write_file(dir.path / "train.tsv", "alice\tknows\tdave\n");
      CHECK_THROWS_WITH_AS(load_mmkg(dir.path), doctest::Contains("dave"), DatasetError);
      write_file(dir.path / "train.tsv", "alice\tlikes\tbob\n");
      CHECK_THROWS_WITH_AS(load_mmkg(dir.path), doctest::Contains("likes"), DatasetError);
      write_file(dir.path / "train.tsv", "alice knows bob\n");
      CHECK_THROWS_AS(load_mmkg(dir.path), DatasetError);
    }
    {
      oracle::TempDir dir("err");
      save_mmkg(toy_kg(), dir.path);
      write_file(dir.path / "visual.json", R"({"rows": 4, "cols": 2, "masked_row_indices": []})");
      CHECK_THROWS_WITH_AS(load_mmkg(dir.path), doctest::Contains("rows"), DatasetError);
    }
    {
      oracle::TempDir dir("err");
      save_mmkg(toy_kg(), dir.path);
      write_file(dir.path / "test.tsv", "alice\tknows\tbob\n");
      CHECK_THROWS_WITH_AS(load_mmkg(dir.path), doctest::Contains("overlap"), DatasetError);
    }
    CHECK_THROWS_AS(load_mmkg("/nonexistent/dhns"), DatasetError);
  }

  TEST_CASE("ids follow file order and survive a save/load round trip") {
    Rng rng(4);
    const Mmkg kg = random_kg(30, 4, 60, 10, 10, rng);
    oracle::TempDir a("rt"), b("rt");
    save_mmkg(kg, a.path);
    const Mmkg once = load_mmkg(a.path);
    save_mmkg(once, b.path);
    const Mmkg twice = load_mmkg(b.path);
    CHECK(once.entities.names() == kg.entities.names());
    CHECK(twice.relations.names() == kg.relations.names());
    CHECK(once.train == kg.train);
    CHECK(twice.test == kg.test);
    CHECK((twice.visual->values - once.visual->values).norm() == 0.0);
  }

  TEST_CASE("vocabulary assigns dense ids in insertion order") {
    Vocabulary v;
    CHECK(v.add("x") == 0);
    CHECK(v.add("y") == 1);
    CHECK(v.add("x") == 0);
    CHECK(v.find("y") == 1);
    CHECK_FALSE(v.find("z").has_value());
  }

  TEST_CASE("filter index membership") {
    Mmkg kg = toy_kg();
    kg.valid = {{2, 0, 0}};
    const FilterIndex f(kg);
    CHECK(f.contains({2, 0, 0}));
    CHECK(f.contains({0, 0, 1}));
    CHECK_FALSE(f.contains({0, 0, 2}));
    CHECK(f.size() == 3);
  }

  TEST_CASE("filter index equals a brute-force scan on a 50-triple fixture") {
    Rng rng(5);
    const Mmkg kg = random_kg(8, 2, 30, 10, 10, rng);
    const FilterIndex f = build_filter_index(kg);
    const auto all = oracle::all_triples(kg);
    for (EntityId h = 0; h < 8; ++h)
      for (RelationId r = 0; r < 2; ++r)
        for (EntityId t = 0; t < 8; ++t) CHECK(f.contains({h, r, t}) == (all.count({h, r, t}) > 0));
    for (EntityId h = 0; h < 8; ++h)
      for (RelationId r = 0; r < 2; ++r) {
        std::vector<EntityId> expected;
        for (const auto& t : all)
          if (t.head == h && t.relation == r) expected.push_back(t.tail);
        std::sort(expected.begin(), expected.end());
        CHECK(f.tails(h, r) == expected);
      }
  }

  TEST_CASE("bernoulli statistics by hand") {
    Mmkg kg = toy_kg();
    kg.relations.add("likes");
    kg.relations.add("unused");
    kg.train = {{0, 0, 1}, {0, 0, 2}, {1, 1, 2}};
    const BernoulliStats s = bernoulli_stats(kg);
    CHECK(s.tph[0] == 2.0);
    CHECK(s.hpt[0] == 1.0);
    CHECK(s.tph[1] == 1.0);
    CHECK(s.hpt[1] == 1.0);
    CHECK(s.head_probability(0) == doctest::Approx(2.0 / 3.0));
    CHECK(s.head_probability(2) == 0.5);
  }

  TEST_CASE("bernoulli statistics match an independent recount") {
    Rng rng(6);
    const Mmkg kg = random_kg(15, 3, 100, 0, 0, rng);
    const BernoulliStats s = bernoulli_stats(kg);
    for (RelationId r = 0; r < 3; ++r) {
      std::set<EntityId> heads, tails;
      int count = 0;
      for (const auto& t : kg.train)
        if (t.relation == r) {
          ++count;
          heads.insert(t.head);
          tails.insert(t.tail);
        }
      CHECK(s.tph[static_cast<std::size_t>(r)] == doctest::Approx(double(count) / heads.size()));
      CHECK(s.hpt[static_cast<std::size_t>(r)] == doctest::Approx(double(count) / tails.size()));
      CHECK(s.tph[static_cast<std::size_t>(r)] >= 1.0);
    }
  }

  TEST_CASE("validate rejects out-of-range ids and feature row mismatch") {
    Mmkg kg = toy_kg();
    kg.train.push_back({0, 0, 3});
    CHECK_THROWS_AS(kg.validate(), DatasetError);
    kg = toy_kg();
    Rng rng(7);
    kg.visual = features(2, 2, rng);
    CHECK_THROWS_AS(kg.validate(), DatasetError);
    CHECK_THROWS_AS(toy_kg().split("dev"), DatasetError);
  }
}
