#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "aec/checkpoint.hpp"
#include "aec/config.hpp"
#include "aec/gassom.hpp"
#include "aec/harness.hpp"

namespace py = pybind11;
using namespace aec;

namespace {

EvalScenes scenes_from_name(const std::string& s) {
  if (s == "uniform-plane") return EvalScenes::uniform_plane;
  if (s == "conflict") return EvalScenes::conflict;
  throw py::value_error("scenes must be 'uniform-plane' or 'conflict'");
}

py::dict summary_dict(const EvaluationSummary& s) {
  py::dict d;
  d["fixations"] = s.fixations;
  d["median_final_residual"] = s.median_final_residual;
  d["mean_final_residual"] = s.mean_final_residual;
  d["convergence_rate"] = s.convergence_rate;
  d["mean_oscillation"] = s.mean_oscillation;
  py::dict sel, step;
  for (int o = 0; o < kNumOptions; ++o) {
    sel[to_string(static_cast<Option>(o))] = s.selections[o];
    step[to_string(static_cast<Option>(o))] = s.mean_selection_step[o];
  }
  d["selections"] = sel;
  d["mean_selection_step"] = step;
  return d;
}

py::dict record_columns(const std::vector<TrajectoryRecord>& records) {
  std::vector<long> fixation;
  std::vector<int> step, vergence, action;
  std::vector<double> ground_truth, residual, reward;
  std::vector<std::string> option;
  for (const TrajectoryRecord& r : records) {
    fixation.push_back(r.fixation);
    step.push_back(r.step);
    vergence.push_back(r.vergence);
    action.push_back(r.action);
    ground_truth.push_back(r.ground_truth);
    residual.push_back(r.residual);
    reward.push_back(r.rewards.parallel);
    option.push_back(r.option ? to_string(*r.option) : "");
  }
  py::dict d;
  d["fixation"] = fixation;
  d["step"] = step;
  d["vergence"] = vergence;
  d["action"] = action;
  d["ground_truth"] = ground_truth;
  d["residual"] = residual;
  d["reward_parallel"] = reward;
  d["option"] = option;
  return d;
}

}  // namespace

PYBIND11_MODULE(_aec, m) {
  m.doc() = "Active efficient coding vergence control";

  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<NumericalFault>(m, "NumericalFault", PyExc_ArithmeticError);

  m.attr("ACTIONS") = std::vector<int>(kVergenceActions.begin(), kVergenceActions.end());
  m.attr("CHECKPOINT_VERSION") = kCheckpointVersion;

  py::class_<ProtocolConfig>(m, "Config")
      .def(py::init<>())
      .def_static("from_ini", &parse_config, py::arg("text"))
      .def_static("load", [](const std::string& path) { return load_config(path); }, py::arg("path"))
      .def("to_ini", &to_ini)
      .def("validate", &validate)
      .def_property(
          "model", [](const ProtocolConfig& c) { return std::string(to_string(c.model)); },
          [](ProtocolConfig& c, const std::string& s) { c.model = model_kind_from_string(s); })
      .def_readwrite("seed", &ProtocolConfig::seed)
      .def_readwrite("scenes_per_run", &ProtocolConfig::scenes_per_run)
      .def_readwrite("fixations_per_scene", &ProtocolConfig::fixations_per_scene)
      .def_readwrite("steps_per_fixation", &ProtocolConfig::steps_per_fixation)
      .def_readwrite("scene_rows", &ProtocolConfig::scene_rows)
      .def_readwrite("scene_cols", &ProtocolConfig::scene_cols)
      .def_readwrite("test_scenes", &ProtocolConfig::test_scenes)
      .def_readwrite("workers", &ProtocolConfig::workers)
      .def_property_readonly("total_steps", &ProtocolConfig::total_steps);

  py::class_<Checkpoint>(m, "Model")
      .def(py::init(&start_training), py::arg("config"))
      .def_static("load", [](const std::string& path) { return load_checkpoint(path); }, py::arg("path"))
      .def_static(
          "from_bytes", [](const py::bytes& b) { return deserialize_checkpoint(std::string(b)); }, py::arg("data"))
      .def("save", [](const Checkpoint& c, const std::string& path) { save_checkpoint(c, path); }, py::arg("path"))
      .def("to_bytes", [](const Checkpoint& c) { return py::bytes(serialize_checkpoint(c)); })
      .def_readonly("config", &Checkpoint::config)
      .def_readonly("fixations_done", &Checkpoint::fixations_done)
      .def_property_readonly("steps", [](const Checkpoint& c) { return c.model.steps; })
      .def_property_readonly("kind", [](const Checkpoint& c) { return std::string(to_string(c.model.kind)); })
      .def(
          "train",
          [](Checkpoint& c, std::optional<long> max_fixations) {
            TrainingOptions opts;
            opts.stop_after_fixations = max_fixations;
            py::gil_scoped_release release;
            run_training(c, opts);
          },
          py::arg("max_fixations") = py::none())
      .def(
          "evaluate",
          [](const Checkpoint& c, const std::string& scenes, int fixations, int initial_residual_range,
             std::uint64_t seed, int workers) {
            EvalConfig e = c.config.eval;
            e.scenes = scenes_from_name(scenes);
            e.fixations = fixations;
            e.initial_residual_range = initial_residual_range;
            EvaluationResult r;
            {
              py::gil_scoped_release release;
              r = run_evaluation(c, e, seed, workers);
            }
            py::dict d = summary_dict(r.summary);
            d["records"] = record_columns(r.records);
            return d;
          },
          py::arg("scenes") = "uniform-plane", py::arg("fixations") = 200, py::arg("initial_residual_range") = 10,
          py::arg("seed") = 1, py::arg("workers") = 1)
      .def(
          "probe",
          [](const Checkpoint& c, int min_disparity, int max_disparity, int probes, std::uint64_t seed, int workers) {
            ProbeConfig p{min_disparity, max_disparity, probes};
            PolicyMatrix m;
            {
              py::gil_scoped_release release;
              m = probe_policy(c, p, seed, workers);
            }
            py::dict d;
            d["disparities"] = m.disparities;
            d["vergence"] = m.vergence;
            d["greedy"] = m.greedy;
            if (m.kind == ModelKind::hierarchical) {
              d["selection"] = m.selection;
              for (int o = 0; o < kNumOptions; ++o)
                d[py::str(std::string("bottom_") + to_string(static_cast<Option>(o)))] = m.bottom[o];
            }
            return d;
          },
          py::arg("min_disparity") = -20, py::arg("max_disparity") = 20, py::arg("probes") = 100,
          py::arg("seed") = 1, py::arg("workers") = 1);

  m.def(
      "plane_scene",
      [](int rows, int cols, int disparity, std::uint64_t seed) {
        SceneSpec spec;
        spec.rows = rows;
        spec.cols = cols;
        spec.background_disparity = disparity;
        const StereoScene s = generate_scene(spec, seed);
        return py::make_tuple(Eigen::MatrixXd(s.left.matrix()), Eigen::MatrixXd(s.right.matrix()),
                              Eigen::MatrixXd(s.disparity.matrix()));
      },
      py::arg("rows"), py::arg("cols"), py::arg("disparity"), py::arg("seed") = 1,
      "Textured fronto-parallel plane as (left, right, disparity) arrays.");

  m.def(
      "disparity_tuning",
      [](int preferred, int min_disparity, int max_disparity, int probes, std::uint64_t seed) {
        const SubspaceDictionary d = make_quadrature_dictionary(preferred);
        std::vector<double> errors;
        for (int x = min_disparity; x <= max_disparity; ++x)
          errors.push_back(probe_disparity_tuning(d, x, probes, seed).mean_error);
        return errors;
      },
      py::arg("preferred"), py::arg("min_disparity") = -4, py::arg("max_disparity") = 4, py::arg("probes") = 100,
      py::arg("seed") = 1, "Mean reconstruction error of a quadrature dictionary over a disparity sweep.");

  m.def("oscillation_metric", &oscillation_metric, py::arg("actions"));
}
