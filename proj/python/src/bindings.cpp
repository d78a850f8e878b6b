#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>

#include "dhns/checkpoint.hpp"
#include "dhns/diffusion.hpp"
#include "dhns/evaluation.hpp"
#include "dhns/kg.hpp"
#include "dhns/negatives.hpp"
#include "dhns/selftest.hpp"
#include "dhns/synthetic.hpp"
#include "dhns/training.hpp"

namespace py = pybind11;
using namespace dhns;

namespace {

struct Dataset {
  std::shared_ptr<Mmkg> kg;
};

struct Model {
  std::shared_ptr<Mmkg> kg;
  TrainConfig config;
  EmbeddingSpace space;
  Denoiser denoiser;
  std::string report;  // JSON, empty for a loaded checkpoint
};

Side parse_side(const std::string& s) {
  if (s == "head") return Side::head;
  if (s == "tail") return Side::tail;
  throw py::value_error("side must be 'head' or 'tail'");
}

Eigen::Matrix<std::int64_t, Eigen::Dynamic, 3, Eigen::RowMajor> triples_array(const std::vector<Triple>& ts) {
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, 3, Eigen::RowMajor> out(static_cast<Eigen::Index>(ts.size()), 3);
  for (std::size_t i = 0; i < ts.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) << ts[i].head, ts[i].relation, ts[i].tail;
  return out;
}

std::string generate_json(const Model& m, const Triple& t, const std::string& side, std::uint64_t seed) {
  Rng rng(seed);
  NegativeBundle b = generate_bundle(m.denoiser, make_schedule(m.config.diffusion_steps), m.space, t,
                                     parse_side(side), generation_options(m.config), rng);
  if (m.config.ablation.no_hal)
    for (auto& e : b.entries) e.margin = m.config.gamma;
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : b.entries) {
    nlohmann::json item = {{"step", e.step}, {"hardness", e.hardness}, {"weight", e.weight}, {"margin", e.margin}};
    for (Modality mod : kModalities) {
      const Vec& v = e.embedding[static_cast<std::size_t>(mod)];
      item[to_string(mod)] = std::vector<double>(v.data(), v.data() + v.size());
    }
    out.push_back(std::move(item));
  }
  return out.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Diffusion-generated hierarchical negatives for multimodal knowledge graph completion";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("energy", [](const std::string& kind, const Vec& h, const Vec& r, const Vec& t) {
    return energy(parse_model_kind(kind), h, r, t);
  }, py::arg("kind"), py::arg("h"), py::arg("r"), py::arg("t"));
  m.def("condition", [](const std::string& kind, const std::string& side, const Vec& observed, const Vec& r) {
    return condition_for(parse_model_kind(kind), parse_side(side), observed, r);
  }, py::arg("kind"), py::arg("side"), py::arg("observed"), py::arg("r"));
  m.def("noise_schedule", [](int steps) {
    const NoiseSchedule s = make_schedule(steps);
    return py::dict(py::arg("alpha") = s.alpha, py::arg("beta") = s.beta, py::arg("beta_bar") = s.beta_bar);
  }, py::arg("steps"));
  m.def("forward_noise", [](int steps, const Vec& x0, int t, const Vec& eps) {
    return forward_noise(make_schedule(steps), x0, t, eps);
  }, py::arg("steps"), py::arg("x0"), py::arg("t"), py::arg("eps"));
  m.def("reverse_final", [](int steps, const Vec& x1, const Vec& eps_hat) {
    return reverse_final(make_schedule(steps), x1, eps_hat);
  }, py::arg("steps"), py::arg("x1"), py::arg("eps_hat"));
  m.def("positional_embedding", &positional_embedding, py::arg("t"), py::arg("dim"));
  m.def("default_steps", &default_steps, py::arg("total_steps"), py::arg("multi_level") = true);
  m.def("level_margin", &level_margin, py::arg("t"), py::arg("total_steps"), py::arg("gamma_min"),
        py::arg("gamma_max"));
  m.def("level_weight", [](int t, int total, const std::vector<int>& steps) {
    return level_weight(t, total, steps);
  }, py::arg("t"), py::arg("total_steps"), py::arg("steps"));
  m.def("hardness_adaptive_loss", [](double positive_energy, double positive_margin,
                                     const std::vector<std::tuple<double, double, double>>& negatives) {
    std::vector<ScoredNegative> n;
    for (const auto& [score, weight, margin] : negatives) n.push_back({score, weight, margin});
    return hardness_adaptive_loss_from_scores(positive_energy, positive_margin, n);
  }, py::arg("positive_energy"), py::arg("positive_margin"), py::arg("negatives"));
  m.def("normalize_config", [](const std::string& json_text) {
    return to_json(config_from_json(nlohmann::json::parse(json_text))).dump();
  }, py::arg("config_json"));
  m.def("selftest", [] {
    std::vector<std::tuple<std::string, bool, std::string>> out;
    for (const auto& r : run_selftest()) out.emplace_back(r.name, r.passed, r.detail);
    return out;
  });

  py::class_<Dataset>(m, "Dataset")
      .def_static("load", [](const std::filesystem::path& dir) { return Dataset{std::make_shared<Mmkg>(load_mmkg(dir))}; },
                  py::arg("path"))
      .def_static("synthetic", [](int entities, int relations, int triples, std::uint64_t seed) {
        SyntheticSpec spec;
        spec.entities = entities;
        spec.relations = relations;
        spec.triples = triples;
        spec.seed = seed;
        return Dataset{std::make_shared<Mmkg>(make_synthetic(spec).kg)};
      }, py::arg("entities") = 200, py::arg("relations") = 10, py::arg("triples") = 2000, py::arg("seed") = 0)
      .def("save", [](const Dataset& d, const std::filesystem::path& dir) { save_mmkg(*d.kg, dir); }, py::arg("path"))
      .def_property_readonly("num_entities", [](const Dataset& d) { return d.kg->num_entities(); })
      .def_property_readonly("num_relations", [](const Dataset& d) { return d.kg->num_relations(); })
      .def_property_readonly("entities", [](const Dataset& d) { return d.kg->entities.names(); })
      .def_property_readonly("relations", [](const Dataset& d) { return d.kg->relations.names(); })
      .def_property_readonly("warnings", [](const Dataset& d) { return d.kg->warnings; })
      .def("triples", [](const Dataset& d, const std::string& split) { return triples_array(d.kg->split(split)); },
           py::arg("split"));

  py::class_<Model>(m, "Model")
      .def_static("train", [](const Dataset& d, const std::string& config_json) {
        const TrainConfig cfg = config_from_json(nlohmann::json::parse(config_json));
        cfg.validate();
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(*d.kg, cfg);
        }
        return Model{d.kg, cfg, std::move(r.space), std::move(r.denoiser), to_json(r.report).dump()};
      }, py::arg("dataset"), py::arg("config_json"))
      .def_static("load", [](const std::filesystem::path& path, const Dataset& d) {
        LoadedModel lm = load_model(read_checkpoint(path), *d.kg);
        return Model{d.kg, lm.config, std::move(lm.space), std::move(lm.denoiser), ""};
      }, py::arg("checkpoint"), py::arg("dataset"))
      .def("save", [](const Model& self, const std::filesystem::path& path) {
        write_checkpoint(path, make_checkpoint(self.config, *self.kg, self.space, self.denoiser));
      }, py::arg("path"))
      .def_property_readonly("config_json", [](const Model& self) { return to_json(self.config).dump(); })
      .def_property_readonly("report_json", [](const Model& self) { return self.report; })
      .def_property_readonly("entity_embeddings", [](const Model& self) { return self.space.entity; })
      .def("evaluate", [](const Model& self, const std::string& split, bool joint) {
        const FilterIndex filter(*self.kg);
        return to_json(evaluate(self.space, *self.kg, filter, split, {joint, 1})).dump();
      }, py::arg("split") = "test", py::arg("joint") = false)
      .def("rank", [](const Model& self, std::int32_t h, std::int32_t r, std::int32_t t, const std::string& side) {
        const FilterIndex filter(*self.kg);
        return rank_query(self.space, filter, {h, r, t}, parse_side(side));
      }, py::arg("head"), py::arg("relation"), py::arg("tail"), py::arg("side"))
      .def("generate", [](const Model& self, std::int32_t h, std::int32_t r, std::int32_t t,
                          const std::string& side, std::uint64_t seed) {
        return generate_json(self, {h, r, t}, side, seed);
      }, py::arg("head"), py::arg("relation"), py::arg("tail"), py::arg("side") = "tail", py::arg("seed") = 0);
}
