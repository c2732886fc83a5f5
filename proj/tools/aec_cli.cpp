#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "aec/checkpoint.hpp"
#include "aec/config.hpp"
#include "aec/export.hpp"
#include "aec/harness.hpp"
#include "aec/image_io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace aec;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> workers;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
  auto* opt = cmd->add_option("--config", c.config, "INI configuration file")->check(CLI::ExistingFile);
  if (config_required) opt->required();
  cmd->add_option("--seed", c.seed, "master seed (overrides the configuration)");
  cmd->add_option("--out", c.out, "output directory")->required();
  cmd->add_option("--workers,-j", c.workers, "worker threads for evaluation and probing")->check(CLI::PositiveNumber);
}

std::string scenes_name(EvalScenes s) { return s == EvalScenes::conflict ? "conflict" : "uniform-plane"; }

EvalScenes scenes_from_name(const std::string& s) {
  if (s == "uniform-plane") return EvalScenes::uniform_plane;
  if (s == "conflict") return EvalScenes::conflict;
  throw std::invalid_argument("unknown scene kind '" + s + "'");
}

// Checkpoint plus the evaluation settings: those of --config when given,
// otherwise the ones stored in the checkpoint.
struct Loaded {
  Checkpoint checkpoint;
  ProtocolConfig settings;
  std::uint64_t seed;
  int workers;
};

Loaded load_for_analysis(const std::string& checkpoint_path, const Common& c) {
  Loaded l{load_checkpoint(checkpoint_path), {}, 0, 1};
  l.settings = c.config.empty() ? l.checkpoint.config : load_config(c.config);
  validate(l.settings);
  l.seed = c.seed.value_or(l.settings.seed);
  l.workers = c.workers.value_or(l.settings.workers);
  return l;
}

// 18 x 18 tiles of the first left-eye basis vector of every subspace.
void write_basis_image(const fs::path& path, const SubspaceDictionary& d) {
  constexpr int kTile = kPatchSide + 1;
  Image img = Image::Constant(kSomSide * kTile + 1, kSomSide * kTile + 1, 0.5);
  for (int k = 0; k < kNumSubspaces; ++k) {
    const Eigen::VectorXd b = d.basis(k).col(0).head(kPatchPixels);
    const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-12);
    const int top = 1 + (k / kSomSide) * kTile, left = 1 + (k % kSomSide) * kTile;
    for (int r = 0; r < kPatchSide; ++r)
      for (int c = 0; c < kPatchSide; ++c) img(top + r, left + c) = 0.5 + 0.5 * b(r * kPatchSide + c) / scale;
  }
  write_pgm(path, img, 255);
}

int cmd_train(const Common& c, const std::string& resume, std::optional<long> max_fixations, bool log_steps) {
  ProtocolConfig config = load_config(c.config);
  if (c.seed) config.seed = *c.seed;
  if (c.workers) config.workers = *c.workers;
  validate(config);
  const fs::path out(c.out);
  fs::create_directories(out);

  Checkpoint ck;
  if (resume.empty()) {
    ck = start_training(config);
  } else {
    ck = load_checkpoint(resume);
    if (to_ini(ck.config) != to_ini(config))
      throw std::invalid_argument("configuration differs from the one stored in " + resume);
  }
  write_text(out / "config.ini", to_ini(config));

  const bool append = !resume.empty();
  MetricsLog metrics(out / "metrics.csv", append);
  std::optional<TrajectoryLog> steps;
  if (log_steps) steps.emplace(out / "trajectories.csv", append);

  TrainingOptions opts;
  opts.checkpoint_dir = out;
  opts.stop_after_fixations = max_fixations;
  opts.on_metrics = [&](const MetricsRow& row) {
    metrics.write(row);
    std::cerr << "steps " << row.steps << "  mean |residual| " << row.mean_final_residual << "  converged "
              << row.convergence_rate << '\n';
  };
  if (steps) opts.on_step = [&](const TrajectoryRecord& r) { steps->write(r); };
  run_training(ck, opts);
  save_checkpoint(ck, out / "checkpoint.bin");
  std::cout << (out / "checkpoint.bin").string() << '\n';
  return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& scenes, const std::string& controller) {
  Loaded l = load_for_analysis(checkpoint, c);
  EvalConfig eval = l.settings.eval;
  if (!scenes.empty()) eval.scenes = scenes_from_name(scenes);
  const fs::path out(c.out);
  fs::create_directories(out);

  EvaluationResult result;
  if (controller == "greedy") {
    result = run_evaluation(l.checkpoint, eval, l.seed, l.workers);
  } else {
    result = run_evaluation(l.checkpoint.config, eval, oracle_controller(), l.seed, l.workers);
  }
  write_trajectories(out / "trajectories.csv", result.records);
  const std::string label = controller == "greedy" ? to_string(l.checkpoint.model.kind) : "oracle";
  const std::string json = summary_json(result.summary, label, scenes_name(eval.scenes));
  write_text(out / "summary.json", json);
  std::cout << json;
  return 0;
}

int cmd_probe(const Common& c, const std::string& checkpoint) {
  Loaded l = load_for_analysis(checkpoint, c);
  const PolicyMatrix m = probe_policy(l.checkpoint, l.settings.probe, l.seed, l.workers);
  for (const fs::path& p : export_policy_matrix(m, c.out)) std::cout << p.string() << '\n';
  return 0;
}

int cmd_gen_scenes(const Common& c, int train_count, int test_count) {
  ProtocolConfig config = load_config(c.config);
  if (c.seed) config.seed = *c.seed;
  config.scene_manifest.clear();
  validate(config);
  const SceneProvider scenes(config);
  const fs::path out(c.out);
  fs::create_directories(out);
  std::ofstream manifest(out / "manifest.csv");
  if (!manifest) throw std::runtime_error("cannot write " + (out / "manifest.csv").string());
  manifest << "split,left,right,disparity\n";
  auto emit = [&](const StereoScene& s, const std::string& split) {
    save_scene(s, out / s.id);
    write_disparity_pgm(out / s.id / "disparity.pgm", s.disparity);
    manifest << split << ',' << s.id << "/left.pgm," << s.id << "/right.pgm," << s.id << "/disparity.csv\n";
  };
  for (int i = 0; i < train_count; ++i) emit(scenes.training_scene(i), "train");
  for (int i = 0; i < test_count; ++i) emit(scenes.test_scene(i, config.eval.scenes), "test");
  std::cout << (out / "manifest.csv").string() << '\n';
  return 0;
}

int cmd_export(const Common& c, const std::string& checkpoint) {
  Loaded l = load_for_analysis(checkpoint, c);
  const fs::path out(c.out);
  fs::create_directories(out);
  const PolicyMatrix m = probe_policy(l.checkpoint, l.settings.probe, l.seed, l.workers);
  export_policy_matrix(m, out / "policy");

  nlohmann::json summaries = nlohmann::json::object();
  for (EvalScenes kind : {EvalScenes::uniform_plane, EvalScenes::conflict}) {
    EvalConfig eval = l.settings.eval;
    eval.scenes = kind;
    const EvaluationResult r = run_evaluation(l.checkpoint, eval, l.seed, l.workers);
    write_trajectories(out / ("trajectories_" + scenes_name(kind) + ".csv"), r.records);
    summaries[scenes_name(kind)] =
        nlohmann::json::parse(summary_json(r.summary, to_string(l.checkpoint.model.kind), scenes_name(kind)));
  }
  write_text(out / "summary.json", summaries.dump(2) + "\n");
  for (Scale s : kScales)
    write_basis_image(out / (std::string("bases_") + to_string(s) + ".pgm"),
                      l.checkpoint.model.dictionaries[index_of(s)]);
  write_text(out / "config.ini", to_ini(l.checkpoint.config));
  std::cout << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active efficient coding vergence control"};
  app.require_subcommand(1);

  Common train_opts, eval_opts, probe_opts, gen_opts, export_opts;
  std::string resume, eval_checkpoint, probe_checkpoint, export_checkpoint, scenes, controller = "greedy";
  std::optional<long> max_fixations;
  bool log_steps = false;
  int train_count = 10, test_count = 10;

  auto* train = app.add_subcommand("train", "train a model from scratch or resume a checkpoint");
  add_common(train, train_opts, true);
  train->add_option("--resume", resume, "checkpoint to continue")->check(CLI::ExistingFile);
  train->add_option("--max-fixations", max_fixations, "stop after this many further fixations")
      ->check(CLI::PositiveNumber);
  train->add_flag("--log-steps", log_steps, "write every training step to trajectories.csv");

  auto* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  add_common(eval, eval_opts, false);
  eval->add_option("--checkpoint", eval_checkpoint, "trained checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--scenes", scenes, "uniform-plane or conflict")
      ->check(CLI::IsMember({"uniform-plane", "conflict"}));
  eval->add_option("--controller", controller, "greedy or oracle")->check(CLI::IsMember({"greedy", "oracle"}));

  auto* probe = app.add_subcommand("probe-policy", "action distributions over uniform-disparity probes");
  add_common(probe, probe_opts, false);
  probe->add_option("--checkpoint", probe_checkpoint, "trained checkpoint")->required()->check(CLI::ExistingFile);

  auto* gen = app.add_subcommand("gen-scenes", "write synthetic scenes and a manifest");
  add_common(gen, gen_opts, true);
  gen->add_option("--train", train_count, "training scenes")->check(CLI::NonNegativeNumber);
  gen->add_option("--test", test_count, "test scenes")->check(CLI::NonNegativeNumber);

  auto* exp = app.add_subcommand("export", "policy tables, trajectories, summaries and basis images");
  add_common(exp, export_opts, false);
  exp->add_option("--checkpoint", export_checkpoint, "trained checkpoint")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(train_opts, resume, max_fixations, log_steps);
    if (*eval) return cmd_eval(eval_opts, eval_checkpoint, scenes, controller);
    if (*probe) return cmd_probe(probe_opts, probe_checkpoint);
    if (*gen) return cmd_gen_scenes(gen_opts, train_count, test_count);
    if (*exp) return cmd_export(export_opts, export_checkpoint);
  } catch (const std::exception& e) {
    std::cerr << "aec: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
