#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gcq/checkpoint.hpp"
#include "gcq/config.hpp"
#include "gcq/error.hpp"
#include "gcq/evaluate.hpp"
#include "gcq/gcq_model.hpp"
#include "gcq/policies.hpp"
#include "gcq/trainer.hpp"

namespace py = pybind11;
using namespace gcq;

namespace {

py::array_t<double> to_numpy(const nn::Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

nn::Matrix from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-d array");
  nn::Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data());
  return m;
}

py::dict observation_dict(const obs::ObservationTensor& o) {
  py::dict d;
  d["X"] = to_numpy(o.X);
  d["A"] = to_numpy(o.A);
  d["mask"] = py::array_t<std::uint8_t>(o.mask.size(), o.mask.data());
  d["slot_ids"] = py::array_t<std::int64_t>(o.slot_ids.size(), o.slot_ids.data());
  d["n_real"] = o.n_real;
  return d;
}

obs::ObservationTensor observation_from(const py::dict& d) {
  obs::ObservationTensor o;
  o.X = from_numpy(d["X"].cast<py::array_t<double>>());
  o.A = from_numpy(d["A"].cast<py::array_t<double>>());
  o.mask = d["mask"].cast<std::vector<std::uint8_t>>();
  o.slot_ids = d["slot_ids"].cast<std::vector<sim::VehicleId>>();
  o.n_real = d["n_real"].cast<std::size_t>();
  return o;
}

class PyEnv {
 public:
  PyEnv(const std::string& config_text, std::uint64_t seed)
      : env_(train::EnvSettings::from(parse_config(config_text)), seed) {}

  void reset(std::uint64_t seed) { env_.reset(seed); }
  py::dict observe() const { return observation_dict(env_.observe()); }

  py::dict step(const std::map<sim::VehicleId, int>& actions) {
    sim::CommandMap cmds;
    for (const auto& [id, a] : actions) cmds[id] = model::action_to_command(a);
    const auto s = env_.step(cmds);
    py::dict d;
    d["reward"] = s.reward.total;
    d["terminal"] = s.terminal;
    d["truncated"] = s.truncated;
    d["collisions"] = s.events.collisions.size();
    d["merged_out"] = s.events.merged_out.size();
    d["lane_changes"] = s.events.lane_changes.size();
    return d;
  }

  std::vector<py::dict> vehicles() const {
    std::vector<py::dict> out;
    for (const auto& v : env_.state().vehicles) {
      py::dict d;
      d["id"] = v.id;
      d["kind"] = sim::to_string(v.kind);
      d["intention"] = sim::to_string(v.intention);
      d["lane"] = v.lane;
      d["position"] = v.position;
      d["speed"] = v.speed;
      out.push_back(d);
    }
    return out;
  }

  std::int64_t steps() const { return env_.steps(); }
  bool finished() const { return env_.finished(); }

 private:
  train::TrafficEnv env_;
};

class PyModel {
 public:
  explicit PyModel(nn::Network net) : net_(std::move(net)) {}

  static PyModel fresh(std::uint64_t seed) {
    Rng rng(seed);
    return PyModel(model::build_gcq({}, rng));
  }
  static PyModel load(const std::string& path) { return PyModel(nn::load_checkpoint(path).network); }

  py::array_t<double> q_values(const py::dict& observation) const {
    return to_numpy(model::forward(net_, observation_from(observation)));
  }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : net_.layers) n += l.W.size() + l.b.size();
    return n;
  }
  std::string describe() const { return model::describe(net_); }

 private:
  nn::Network net_;
};

std::string evaluate_json(const std::string& checkpoint, const std::vector<std::string>& baselines,
                          const std::vector<double>& inflows, int episodes, std::uint64_t seed, int workers) {
  const auto ckpt = nn::load_checkpoint(checkpoint);
  const RunConfig cfg = harness::checkpoint_config(ckpt);
  std::vector<harness::NamedPolicy> policies{{"gcq", harness::greedy_policy(ckpt.network)}};
  for (const auto& b : baselines) {
    if (b == "rule_based")
      policies.push_back({b, harness::rule_based_policy(cfg.baseline)});
    else if (b == "random")
      policies.push_back({b, harness::random_policy()});
    else
      throw ConfigError("unknown baseline '" + b + "'");
  }
  harness::EvalOptions opt;
  opt.inflows = inflows;
  opt.episodes = episodes;
  opt.seed = seed;
  opt.workers = workers;
  return harness::report_json(harness::evaluate(policies, cfg, opt));
}

}  // namespace

PYBIND11_MODULE(_gcq, m) {
  m.doc() = "GCQ lane-changing lab";

  py::register_exception<Error>(m, "GcqError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DigestMismatchError>(m, "DigestMismatchError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  m.def("default_config", [](const std::string& preset) {
    return parse_config("preset = " + preset + "\n").canonical_text();
  }, py::arg("preset") = "desk");
  m.def("canonical_config", [](const std::string& text) { return parse_config(text).canonical_text(); });
  m.def("config_digest", [](const std::string& text) { return parse_config(text).digest(); });
  m.def("structural_digest", [](const std::string& text) { return parse_config(text).structural_digest(); });

  py::class_<PyEnv>(m, "Env")
      .def(py::init<const std::string&, std::uint64_t>(), py::arg("config_text"), py::arg("seed") = 1)
      .def("reset", &PyEnv::reset, py::arg("seed"))
      .def("observe", &PyEnv::observe)
      .def("step", &PyEnv::step, py::arg("actions"))
      .def("vehicles", &PyEnv::vehicles)
      .def_property_readonly("steps", &PyEnv::steps)
      .def_property_readonly("finished", &PyEnv::finished);

  py::class_<PyModel>(m, "Model")
      .def_static("fresh", &PyModel::fresh, py::arg("seed") = 1)
      .def_static("load", &PyModel::load, py::arg("path"))
      .def("q_values", &PyModel::q_values, py::arg("observation"))
      .def_property_readonly("parameter_count", &PyModel::parameter_count)
      .def("describe", &PyModel::describe);

  m.def("gradcheck", [](std::uint64_t seed) { return model::gradcheck_gcq(seed).max_relative_error; },
        py::arg("seed"));

  m.def("train", [](const std::string& config_text, const std::string& out_dir) {
    RunConfig cfg = parse_config(config_text);
    cfg.validate();
    py::gil_scoped_release release;
    return train::run_training(cfg, out_dir).final_checkpoint;
  }, py::arg("config_text"), py::arg("out_dir"));

  m.def("evaluate", [](const std::string& checkpoint, const std::vector<std::string>& baselines,
                       const std::vector<double>& inflows, int episodes, std::uint64_t seed, int workers) {
    py::gil_scoped_release release;
    return evaluate_json(checkpoint, baselines, inflows, episodes, seed, workers);
  }, py::arg("checkpoint"), py::arg("baselines") = std::vector<std::string>{"rule_based", "random"},
        py::arg("inflows") = std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5}, py::arg("episodes") = 10,
        py::arg("seed") = 1, py::arg("workers") = 1);
}
