// dhns: train, evaluate, generate, make-synthetic, selftest.
//
// Failures print one JSON line {"error": ..., "field": ...} to stderr.
// Exit 2 for usage, config and missing-input errors, 1 for anything else.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dhns/checkpoint.hpp"
#include "dhns/evaluation.hpp"
#include "dhns/kg.hpp"
#include "dhns/negatives.hpp"
#include "dhns/parallel.hpp"
#include "dhns/selftest.hpp"
#include "dhns/synthetic.hpp"
#include "dhns/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kGenerateStream = 7;

// An error attributable to one input; reported with exit code 2.
struct InputError : std::runtime_error {
  InputError(std::string f, const std::string& msg) : std::runtime_error(msg), field(std::move(f)) {}
  std::string field;
};

int fail(int code, const std::string& message, const std::string& field = "") {
  json j = {{"error", message}};
  if (!field.empty()) j["field"] = field;
  std::cerr << j.dump() << '\n';
  return code;
}

void require_exists(const std::string& field, const fs::path& p) {
  if (!fs::exists(p)) throw InputError(field, "not found: " + p.string());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

dhns::Mmkg load_dataset(const fs::path& dir) {
  require_exists("dataset", dir);
  dhns::Mmkg kg = dhns::load_mmkg(dir);
  for (const auto& w : kg.warnings) std::cerr << "warning: " << w << '\n';
  return kg;
}

dhns::TrainConfig load_config(const fs::path& path) {
  require_exists("config", path);
  std::ifstream in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("config", e.what());
  }
  return dhns::config_from_json(j);
}

dhns::LoadedModel load_checkpoint(const fs::path& path, const dhns::Mmkg& kg) {
  require_exists("checkpoint", path);
  return dhns::load_model(dhns::read_checkpoint(path), kg);
}

struct Options {
  std::string config;
  std::string dataset;
  std::string out;
  std::string checkpoint;
  std::string split = "test";
  std::optional<std::uint64_t> seed;
  int threads = 0;
  dhns::SyntheticSpec synthetic;
};

int cmd_train(const Options& o) {
  dhns::TrainConfig cfg = load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  cfg.threads = dhns::resolve_threads(o.threads > 0 ? o.threads : cfg.threads);
  cfg.validate();
  const dhns::Mmkg kg = load_dataset(o.dataset);

  const auto start = std::chrono::steady_clock::now();
  dhns::Trainer trainer(kg, cfg);
  dhns::TrainReport report = trainer.run();
  const dhns::FilterIndex filter(kg);
  const dhns::EvalResult valid =
      dhns::evaluate(trainer.space(), kg, filter, "valid", {cfg.eval_joint, cfg.threads});
  report.final_metrics = valid;
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  fs::create_directories(o.out);
  dhns::write_checkpoint(fs::path(o.out) / "checkpoint.bin", trainer.checkpoint());
  write_text(fs::path(o.out) / "report.json", dhns::to_json(report).dump(2) + "\n");
  write_text(fs::path(o.out) / "eval_valid.json", dhns::to_json(valid).dump(2) + "\n");
  std::cerr << dhns::format_table(valid);
  std::fprintf(stderr, "wall time %.2f s\n", seconds);
  return 0;
}

int cmd_evaluate(const Options& o) {
  const dhns::Mmkg kg = load_dataset(o.dataset);
  const dhns::LoadedModel model = load_checkpoint(o.checkpoint, kg);
  if (o.split != "train" && o.split != "valid" && o.split != "test")
    throw InputError("split", "split must be train, valid or test");
  const dhns::FilterIndex filter(kg);
  const int threads = dhns::resolve_threads(o.threads);
  const dhns::EvalResult r =
      dhns::evaluate(model.space, kg, filter, o.split, {model.config.eval_joint, threads});
  const std::string text = dhns::to_json(r).dump(2) + "\n";
  if (o.out.empty())
    std::cout << text;
  else
    write_text(o.out, text);
  std::cerr << dhns::format_table(r);
  return 0;
}

json entries_json(const dhns::NegativeBundle& b) {
  json entries = json::array();
  for (const auto& e : b.entries) {
    json item = {{"step", e.step}, {"hardness", e.hardness}, {"weight", e.weight},
                 {"margin", e.margin}};
    for (dhns::Modality m : dhns::kModalities) {
      const dhns::Vec& v = e.embedding[static_cast<std::size_t>(m)];
      item[dhns::to_string(m)] = std::vector<double>(v.data(), v.data() + v.size());
    }
    entries.push_back(std::move(item));
  }
  return entries;
}

int cmd_generate(const Options& o) {
  const dhns::Mmkg kg = load_dataset(o.dataset);
  const dhns::LoadedModel model = load_checkpoint(o.checkpoint, kg);
  if (o.out.empty()) throw InputError("out", "generate needs --out");
  const dhns::TrainConfig& cfg = model.config;
  const auto& triples = kg.split(o.split);
  const dhns::GenerationOptions opt = dhns::generation_options(cfg);
  const dhns::NoiseSchedule schedule = dhns::make_schedule(cfg.diffusion_steps);
  const dhns::Rng root(o.seed.value_or(cfg.seed));

  std::ofstream out(o.out, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + o.out);
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const dhns::Triple& t = triples[i];
    json line = {{"head", kg.entities.name(t.head)},
                 {"relation", kg.relations.name(t.relation)},
                 {"tail", kg.entities.name(t.tail)}};
    for (dhns::Side side : {dhns::Side::head, dhns::Side::tail}) {
      dhns::Rng rng = root.substream(kGenerateStream, i, static_cast<std::uint64_t>(side));
      dhns::NegativeBundle b =
          dhns::generate_bundle(model.denoiser, schedule, model.space, t, side, opt, rng);
      if (cfg.ablation.no_hal)
        for (auto& e : b.entries) e.margin = cfg.gamma;
      line[side == dhns::Side::head ? "head_negatives" : "tail_negatives"] = entries_json(b);
    }
    out << line.dump() << '\n';
  }
  return 0;
}

int cmd_make_synthetic(const Options& o) {
  if (o.out.empty()) throw InputError("out", "make-synthetic needs --out");
  dhns::SyntheticSpec spec = o.synthetic;
  if (o.seed) spec.seed = *o.seed;
  const dhns::SyntheticDataset ds = dhns::make_synthetic(spec);
  dhns::save_mmkg(ds.kg, o.out);
  const json planted = {{"cluster", ds.cluster}, {"rule", ds.rule}};
  write_text(fs::path(o.out) / "planted.json", planted.dump() + "\n");
  return 0;
}

int cmd_selftest() {
  int failures = 0;
  for (const auto& r : dhns::run_selftest()) {
    std::printf("[%s] %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    if (!r.passed) ++failures;
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion-generated hierarchical negatives for multimodal KG completion"};
  app.require_subcommand(1);
  Options o;

  const auto add_threads = [&](CLI::App* c) {
    c->add_option("--threads", o.threads, "worker threads (default: DHNS_THREADS or 1)")
        ->check(CLI::NonNegativeNumber);
  };
  const auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "override the seed"); };

  auto* train = app.add_subcommand("train", "train a model and evaluate it on the valid split");
  train->add_option("--config", o.config, "JSON training config")->required();
  train->add_option("--dataset", o.dataset, "dataset directory")->required();
  train->add_option("--out", o.out, "output directory")->required();
  add_seed(train);
  add_threads(train);

  auto* evaluate = app.add_subcommand("evaluate", "filtered link prediction metrics");
  evaluate->add_option("--checkpoint", o.checkpoint)->required();
  evaluate->add_option("--dataset", o.dataset)->required();
  evaluate->add_option("--split", o.split, "train, valid or test");
  evaluate->add_option("--out", o.out, "write JSON here instead of stdout");
  add_threads(evaluate);

  auto* generate = app.add_subcommand("generate", "dump generated negatives as JSON lines");
  generate->add_option("--checkpoint", o.checkpoint)->required();
  generate->add_option("--dataset", o.dataset)->required();
  generate->add_option("--out", o.out)->required();
  generate->add_option("--split", o.split, "triples to generate for");
  add_seed(generate);

  auto* synth = app.add_subcommand("make-synthetic", "write a cluster-planted dataset");
  synth->add_option("--out", o.out)->required();
  synth->add_option("--entities", o.synthetic.entities)->check(CLI::PositiveNumber);
  synth->add_option("--relations", o.synthetic.relations)->check(CLI::PositiveNumber);
  synth->add_option("--triples", o.synthetic.triples)->check(CLI::PositiveNumber);
  synth->add_option("--visual-dim", o.synthetic.visual_dim)->check(CLI::PositiveNumber);
  synth->add_option("--textual-dim", o.synthetic.textual_dim)->check(CLI::PositiveNumber);
  add_seed(synth);

  auto* selftest = app.add_subcommand("selftest", "run the invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, e.what());
  }

  try {
    if (*train) return cmd_train(o);
    if (*evaluate) return cmd_evaluate(o);
    if (*generate) return cmd_generate(o);
    if (*synth) return cmd_make_synthetic(o);
    if (*selftest) return cmd_selftest();
  } catch (const InputError& e) {
    return fail(2, e.what(), e.field);
  } catch (const dhns::ConfigError& e) {
    return fail(2, e.what(), e.field());
  } catch (const dhns::DatasetError& e) {
    return fail(2, e.what(), "dataset");
  } catch (const dhns::CheckpointError& e) {
    return fail(2, e.what(), "checkpoint");
  } catch (const std::exception& e) {
    return fail(1, e.what());
  }
  return 0;
}
