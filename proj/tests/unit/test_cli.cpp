#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "support/oracles.hpp"

#ifdef DHNS_CLI_PATH

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(const oracle::TempDir& dir, const std::string& args) {
  const fs::path out = dir.path / "stdout.txt", err = dir.path / "stderr.txt";
  const std::string cmd = std::string("\"") + DHNS_CLI_PATH + "\" " + args + " > \"" + out.string() +
                          "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
#ifdef _WIN32
  r.code = status;
#else
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
#endif
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

json last_json_line(const std::string& text) {
  std::istringstream in(text);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty() && line.front() == '{') last = line;
  return json::parse(last);
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

const char* kToyConfig =
    R"({"dim": 8, "diffusion_steps": 20, "epochs": 2, "batch_size": 64, "negatives": 4})";

std::string toy_dataset(const oracle::TempDir& dir) {
  const fs::path data = dir.path / "data";
  const Run r = run(dir, "make-synthetic --out \"" + data.string() +
                             "\" --entities 40 --relations 3 --triples 300 --seed 2");
  REQUIRE(r.code == 0);
  return data.string();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("make-synthetic is reproducible and writes the planted structure") {
    oracle::TempDir dir("cli-synth");
    for (const char* name : {"a", "b"}) {
      const Run r = run(dir, "make-synthetic --out \"" + (dir.path / name).string() +
                                 "\" --entities 30 --relations 2 --triples 100 --seed 4");
      REQUIRE(r.code == 0);
    }
    for (const char* f : {"train.tsv", "valid.tsv", "test.tsv", "entities.txt", "relations.txt",
                          "visual.f32", "visual.json", "textual.f32", "textual.json", "planted.json"})
      CHECK_MESSAGE(slurp(dir.path / "a" / f) == slurp(dir.path / "b" / f), f);
    const json planted = json::parse(slurp(dir.path / "a" / "planted.json"));
    CHECK(planted["cluster"].size() == 30);
    CHECK(planted["rule"].size() == 2);
  }

  TEST_CASE("train, evaluate and generate on a toy dataset") {
    oracle::TempDir dir("cli-train");
    const std::string data = toy_dataset(dir);
    write(dir.path / "config.json", kToyConfig);
    const std::string cfg = (dir.path / "config.json").string();
    const std::string out1 = (dir.path / "run1").string(), out2 = (dir.path / "run2").string();

    const Run t1 = run(dir, "train --config \"" + cfg + "\" --dataset \"" + data + "\" --out \"" + out1 + "\"");
    REQUIRE_MESSAGE(t1.code == 0, t1.err);
    CHECK(t1.err.find("MRR") != std::string::npos);
    CHECK(t1.err.find("wall time") != std::string::npos);
    for (const char* f : {"checkpoint.bin", "report.json", "eval_valid.json"})
      CHECK(fs::exists(fs::path(out1) / f));
    const json report = json::parse(slurp(fs::path(out1) / "report.json"));
    CHECK(report["epochs"].size() == 2);

    const Run t2 = run(dir, "train --config \"" + cfg + "\" --dataset \"" + data + "\" --out \"" + out2 + "\"");
    REQUIRE(t2.code == 0);
    CHECK(slurp(fs::path(out1) / "report.json") == slurp(fs::path(out2) / "report.json"));
    CHECK(slurp(fs::path(out1) / "checkpoint.bin") == slurp(fs::path(out2) / "checkpoint.bin"));

    const std::string ckpt = (fs::path(out1) / "checkpoint.bin").string();
    const Run ev = run(dir, "evaluate --checkpoint \"" + ckpt + "\" --dataset \"" + data + "\" --split valid");
    REQUIRE(ev.code == 0);
    const json metrics = json::parse(ev.out);
    CHECK(metrics == json::parse(slurp(fs::path(out1) / "eval_valid.json")));
    for (const char* key : {"mrr", "hits1", "hits3", "hits10", "head", "tail"}) CHECK(metrics.contains(key));

    const fs::path gen = dir.path / "negatives.jsonl";
    const Run g = run(dir, "generate --checkpoint \"" + ckpt + "\" --dataset \"" + data + "\" --out \"" +
                               gen.string() + "\"");
    REQUIRE_MESSAGE(g.code == 0, g.err);
    std::istringstream lines(slurp(gen));
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) {
      const json j = json::parse(line);
      REQUIRE(j["tail_negatives"].size() == 4);
      REQUIRE(j["head_negatives"].size() == 4);
      CHECK(j["tail_negatives"][0]["step"] == 1);
      CHECK(j["tail_negatives"][3]["step"] == 10);
      CHECK(j["tail_negatives"][0]["struc"].size() == 8);
      ++count;
    }
    CHECK(count == 30);
  }

  TEST_CASE("errors exit with code 2 and name the field") {
    oracle::TempDir dir("cli-errors");
    const std::string data = toy_dataset(dir);
    write(dir.path / "bad.json", R"({"dim": 0})");
    Run r = run(dir, "train --config \"" + (dir.path / "bad.json").string() + "\" --dataset \"" + data +
                         "\" --out \"" + (dir.path / "o").string() + "\"");
    CHECK(r.code == 2);
    CHECK(last_json_line(r.err)["field"] == "dim");

    write(dir.path / "unknown.json", R"({"dim": 8, "learning_rate": 1})");
    r = run(dir, "train --config \"" + (dir.path / "unknown.json").string() + "\" --dataset \"" + data +
                     "\" --out \"" + (dir.path / "o").string() + "\"");
    CHECK(r.code == 2);
    CHECK(last_json_line(r.err)["field"] == "learning_rate");

    write(dir.path / "broken.json", R"({"dim": )");
    r = run(dir, "train --config \"" + (dir.path / "broken.json").string() + "\" --dataset \"" + data +
                     "\" --out \"" + (dir.path / "o").string() + "\"");
    CHECK(r.code == 2);
    CHECK(last_json_line(r.err)["field"] == "config");

    r = run(dir, "evaluate --checkpoint \"" + (dir.path / "missing.bin").string() + "\" --dataset \"" + data + "\"");
    CHECK(r.code == 2);
    CHECK(last_json_line(r.err)["field"] == "checkpoint");

    r = run(dir, "train --config \"" + (dir.path / "bad.json").string() + "\" --dataset \"" +
                     (dir.path / "nowhere").string() + "\" --out x");
    CHECK(r.code == 2);

    r = run(dir, "");
    CHECK(r.code == 2);
  }

  TEST_CASE("selftest passes") {
    oracle::TempDir dir("cli-selftest");
    const Run r = run(dir, "selftest");
    CHECK(r.code == 0);
    CHECK(r.out.find("[PASS]") != std::string::npos);
    CHECK(r.out.find("[FAIL]") == std::string::npos);
  }
}

#endif
