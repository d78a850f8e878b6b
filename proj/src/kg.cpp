#include "dhns/kg.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace dhns {

namespace fs = std::filesystem;

Vocabulary::Vocabulary(std::vector<std::string> names) {
  for (auto& n : names) add(n);
}

std::int32_t Vocabulary::add(const std::string& name) {
  if (auto it = ids_.find(name); it != ids_.end()) return it->second;
  const auto id = static_cast<std::int32_t>(names_.size());
  names_.push_back(name);
  ids_.emplace(name, id);
  return id;
}

std::optional<std::int32_t> Vocabulary::find(const std::string& name) const {
  if (auto it = ids_.find(name); it != ids_.end()) return it->second;
  return std::nullopt;
}

std::vector<std::int64_t> ModalityFeatures::masked_rows() const {
  std::vector<std::int64_t> rows;
  for (std::size_t i = 0; i < present.size(); ++i)
    if (!present[i]) rows.push_back(static_cast<std::int64_t>(i));
  return rows;
}

const std::vector<Triple>& Mmkg::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "valid") return valid;
  if (name == "test") return test;
  throw DatasetError("unknown split '" + name + "'");
}

void Mmkg::validate() const {
  const auto check_split = [&](const std::vector<Triple>& triples, const char* name) {
    for (const auto& t : triples) {
      if (t.head < 0 || t.head >= num_entities() || t.tail < 0 || t.tail >= num_entities() ||
          t.relation < 0 || t.relation >= num_relations())
        throw DatasetError(std::string("triple in ") + name + " references an invalid id");
    }
  };
  check_split(train, "train");
  check_split(valid, "valid");
  check_split(test, "test");

  std::set<Triple> seen;
  for (const auto* split : {&train, &valid, &test}) {
    std::set<Triple> mine(split->begin(), split->end());
    for (const auto& t : mine)
      if (!seen.insert(t).second) throw DatasetError("train/valid/test splits overlap");
  }

  for (const auto& [features, name] : {std::pair{visual, "visual"}, std::pair{textual, "textual"}}) {
    if (!features) throw DatasetError(std::string(name) + " features missing");
    if (features->rows() != num_entities() ||
        static_cast<std::int32_t>(features->present.size()) != num_entities())
      throw DatasetError(std::string(name) + " feature rows (" + std::to_string(features->rows()) +
                         ") do not match entity count (" + std::to_string(num_entities()) + ")");
  }
}

namespace {

fs::path require(const fs::path& dir, const char* name) {
  fs::path p = dir / name;
  if (!fs::exists(p)) throw DatasetError("missing file: " + p.string());
  return p;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

Vocabulary read_vocabulary(const fs::path& path) {
  Vocabulary v;
  for (const auto& name : read_lines(path)) {
    if (v.find(name)) throw DatasetError("duplicate name '" + name + "' in " + path.string());
    v.add(name);
  }
  return v;
}

std::vector<Triple> read_triples(const fs::path& path, const Vocabulary& entities,
                                 const Vocabulary& relations) {
  std::vector<Triple> triples;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    const std::string where = path.filename().string() + ":" + std::to_string(line_no);
    if (fields.size() != 3) throw DatasetError(where + ": expected head<TAB>relation<TAB>tail");
    const auto h = entities.find(fields[0]);
    const auto r = relations.find(fields[1]);
    const auto t = entities.find(fields[2]);
    if (!h) throw DatasetError(where + ": unknown entity '" + fields[0] + "'");
    if (!r) throw DatasetError(where + ": unknown relation '" + fields[1] + "'");
    if (!t) throw DatasetError(where + ": unknown entity '" + fields[2] + "'");
    triples.push_back({*h, *r, *t});
  }
  return triples;
}

std::shared_ptr<const ModalityFeatures> read_features(const fs::path& dir, const std::string& stem,
                                                      std::int32_t n_entities,
                                                      std::vector<std::string>& warnings) {
  const fs::path data_path = require(dir, (stem + ".f32").c_str());
  const fs::path meta_path = require(dir, (stem + ".json").c_str());
  std::ifstream meta_in(meta_path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_in);
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(meta_path.string() + ": " + e.what());
  }
  const auto rows = meta.at("rows").get<std::int64_t>();
  const auto cols = meta.at("cols").get<std::int64_t>();
  const auto masked = meta.value("masked_row_indices", std::vector<std::int64_t>{});
  if (rows != n_entities)
    throw DatasetError(stem + " feature rows (" + std::to_string(rows) +
                       ") do not match entity count (" + std::to_string(n_entities) + ")");
  if (cols < 1) throw DatasetError(stem + " feature matrix has no columns");

  std::ifstream in(data_path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (static_cast<std::int64_t>(bytes.size()) != rows * cols * 4)
    throw DatasetError(data_path.string() + ": expected " + std::to_string(rows * cols * 4) +
                       " bytes, found " + std::to_string(bytes.size()));

  auto f = std::make_shared<ModalityFeatures>();
  f->values.resize(rows, cols);
  f->present.assign(static_cast<std::size_t>(rows), true);
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  for (std::int64_t i = 0; i < rows * cols; ++i) {
    std::uint32_t bits = 0;
    for (int b = 3; b >= 0; --b) bits = (bits << 8) | raw[4 * i + b];
    f->values.data()[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  if (!f->values.allFinite()) throw DatasetError(data_path.string() + ": non-finite feature value");
  for (auto row : masked) {
    if (row < 0 || row >= rows)
      throw DatasetError(stem + " masked row index " + std::to_string(row) + " out of range");
    f->present[static_cast<std::size_t>(row)] = false;
    f->values.row(row).setZero();
  }
  if (!masked.empty())
    warnings.push_back(stem + ": " + std::to_string(masked.size()) +
                       " entities lack this modality; zero rows substituted");
  return f;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

void write_features(const fs::path& dir, const std::string& stem, const ModalityFeatures& f) {
  std::string bytes;
  bytes.reserve(static_cast<std::size_t>(f.values.size()) * 4);
  for (Eigen::Index i = 0; i < f.values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(f.values.data()[i]));
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
  std::ofstream out(dir / (stem + ".f32"), std::ios::binary | std::ios::trunc);
  out << bytes;
  nlohmann::json meta = {
      {"rows", f.values.rows()}, {"cols", f.values.cols()}, {"masked_row_indices", f.masked_rows()}};
  std::ofstream(dir / (stem + ".json"), std::ios::trunc) << meta.dump() << '\n';
}

}  // namespace

Mmkg load_mmkg(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DatasetError("dataset directory not found: " + dir.string());
  Mmkg kg;
  kg.entities = read_vocabulary(require(dir, "entities.txt"));
  kg.relations = read_vocabulary(require(dir, "relations.txt"));
  kg.train = read_triples(require(dir, "train.tsv"), kg.entities, kg.relations);
  kg.valid = read_triples(require(dir, "valid.tsv"), kg.entities, kg.relations);
  kg.test = read_triples(require(dir, "test.tsv"), kg.entities, kg.relations);
  kg.visual = read_features(dir, "visual", kg.num_entities(), kg.warnings);
  kg.textual = read_features(dir, "textual", kg.num_entities(), kg.warnings);
  kg.validate();
  return kg;
}

void save_mmkg(const Mmkg& kg, const fs::path& dir) {
  fs::create_directories(dir);
  write_lines(dir / "entities.txt", kg.entities.names());
  write_lines(dir / "relations.txt", kg.relations.names());
  const auto triples = [&](const std::vector<Triple>& split) {
    std::vector<std::string> lines;
    for (const auto& t : split)
      lines.push_back(kg.entities.name(t.head) + "\t" + kg.relations.name(t.relation) + "\t" +
                      kg.entities.name(t.tail));
    return lines;
  };
  write_lines(dir / "train.tsv", triples(kg.train));
  write_lines(dir / "valid.tsv", triples(kg.valid));
  write_lines(dir / "test.tsv", triples(kg.test));
  write_features(dir, "visual", *kg.visual);
  write_features(dir, "textual", *kg.textual);
}

std::uint64_t FilterIndex::key(std::int32_t a, std::int32_t b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

FilterIndex::FilterIndex(const Mmkg& kg) {
  for (const auto* split : {&kg.train, &kg.valid, &kg.test}) {
    for (const auto& t : *split) {
      auto& tails = tails_[key(t.head, t.relation)];
      if (std::find(tails.begin(), tails.end(), t.tail) != tails.end()) continue;
      tails.push_back(t.tail);
      heads_[key(t.relation, t.tail)].push_back(t.head);
      ++count_;
    }
  }
  for (auto& [k, v] : tails_) std::sort(v.begin(), v.end());
  for (auto& [k, v] : heads_) std::sort(v.begin(), v.end());
}

bool FilterIndex::contains(const Triple& t) const {
  const auto& tails = this->tails(t.head, t.relation);
  return std::binary_search(tails.begin(), tails.end(), t.tail);
}

const std::vector<EntityId>& FilterIndex::tails(EntityId head, RelationId relation) const {
  static const std::vector<EntityId> empty;
  auto it = tails_.find(key(head, relation));
  return it == tails_.end() ? empty : it->second;
}

const std::vector<EntityId>& FilterIndex::heads(RelationId relation, EntityId tail) const {
  static const std::vector<EntityId> empty;
  auto it = heads_.find(key(relation, tail));
  return it == heads_.end() ? empty : it->second;
}

FilterIndex build_filter_index(const Mmkg& kg) { return FilterIndex(kg); }

double BernoulliStats::head_probability(RelationId r) const {
  const auto i = static_cast<std::size_t>(r);
  const double sum = tph.at(i) + hpt.at(i);
  return sum > 0.0 ? tph[i] / sum : 0.5;
}

BernoulliStats bernoulli_stats(const Mmkg& kg) {
  if (kg.train.empty()) throw DatasetError("bernoulli_stats: train split is empty");
  const auto n_rel = static_cast<std::size_t>(kg.num_relations());
  std::vector<std::size_t> count(n_rel, 0);
  std::vector<std::unordered_set<EntityId>> heads(n_rel), tails(n_rel);
  for (const auto& t : kg.train) {
    const auto r = static_cast<std::size_t>(t.relation);
    ++count[r];
    heads[r].insert(t.head);
    tails[r].insert(t.tail);
  }
  BernoulliStats s;
  s.tph.assign(n_rel, 0.0);
  s.hpt.assign(n_rel, 0.0);
  for (std::size_t r = 0; r < n_rel; ++r) {
    if (count[r] == 0) continue;
    s.tph[r] = static_cast<double>(count[r]) / static_cast<double>(heads[r].size());
    s.hpt[r] = static_cast<double>(count[r]) / static_cast<double>(tails[r].size());
  }
  return s;
}

}  // namespace dhns
