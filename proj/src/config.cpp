#include "aec/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <type_traits>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace aec {
namespace {

std::string format_value(const std::string& v) { return v; }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(ModelKind v) { return to_string(v); }
std::string format_value(EvalScenes v) { return v == EvalScenes::uniform_plane ? "uniform-plane" : "conflict"; }
template <typename T>
  requires std::is_arithmetic_v<T>
std::string format_value(T v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void parse_value(const std::string& s, std::string& out) { out = s; }
void parse_value(const std::string& s, bool& out) {
  if (s == "true" || s == "1") {
    out = true;
  } else if (s == "false" || s == "0") {
    out = false;
  } else {
    throw std::invalid_argument("expected true or false, got '" + s + "'");
  }
}
void parse_value(const std::string& s, ModelKind& out) { out = model_kind_from_string(s); }
void parse_value(const std::string& s, EvalScenes& out) {
  out = scene_kind_from_string(s) == SceneKind::uniform_plane ? EvalScenes::uniform_plane : EvalScenes::conflict;
}
template <typename T>
  requires std::is_arithmetic_v<T>
void parse_value(const std::string& s, T& out) {
  T value{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument("cannot parse '" + s + "' as a number");
  out = value;
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const ProtocolConfig&)> get;
  std::function<void(ProtocolConfig&, const std::string&)> set;
};

template <typename Access>
Field field(std::string section, std::string key, Access access) {
  return {std::move(section), std::move(key),
          [access](const ProtocolConfig& c) { return format_value(access(const_cast<ProtocolConfig&>(c))); },
          [access](ProtocolConfig& c, const std::string& s) { parse_value(s, access(c)); }};
}

#define AEC_FIELD(section, key, expr) field(section, key, [](ProtocolConfig& c) -> auto& { return c.expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      AEC_FIELD("protocol", "model", model),
      AEC_FIELD("protocol", "seed", seed),
      AEC_FIELD("protocol", "scenes_per_run", scenes_per_run),
      AEC_FIELD("protocol", "fixations_per_scene", fixations_per_scene),
      AEC_FIELD("protocol", "steps_per_fixation", steps_per_fixation),
      AEC_FIELD("protocol", "initial_residual_range", initial_residual_range),
      AEC_FIELD("protocol", "scene_rows", scene_rows),
      AEC_FIELD("protocol", "scene_cols", scene_cols),
      AEC_FIELD("protocol", "test_scenes", test_scenes),
      AEC_FIELD("protocol", "checkpoint_interval", checkpoint_interval),
      AEC_FIELD("protocol", "metrics_interval", metrics_interval),
      AEC_FIELD("protocol", "workers", workers),
      AEC_FIELD("protocol", "scene_manifest", scene_manifest),

      AEC_FIELD("environment", "max_disparity", limits.max_disparity),
      AEC_FIELD("environment", "max_vergence", limits.max_vergence),

      AEC_FIELD("texture", "noise_weight", texture.noise_weight),
      AEC_FIELD("texture", "grating_weight", texture.grating_weight),
      AEC_FIELD("texture", "min_gratings", texture.min_gratings),
      AEC_FIELD("texture", "max_gratings", texture.max_gratings),
      AEC_FIELD("texture", "min_period", texture.min_period),
      AEC_FIELD("texture", "max_period", texture.max_period),

      AEC_FIELD("curriculum", "uniform_fraction", curriculum.uniform_fraction),
      AEC_FIELD("curriculum", "plane_disparity_range", curriculum.plane_disparity_range),
      AEC_FIELD("curriculum", "conflict_disparity_range", curriculum.conflict_disparity_range),
      AEC_FIELD("curriculum", "min_extent", curriculum.min_extent),
      AEC_FIELD("curriculum", "max_extent", curriculum.max_extent),
      AEC_FIELD("curriculum", "pinned_fraction", curriculum.pinned_fraction),

      AEC_FIELD("gassom", "responsibility_temperature", agent.gassom.responsibility_temperature),
      AEC_FIELD("gassom", "sigma_initial", agent.gassom.sigma_initial),
      AEC_FIELD("gassom", "sigma_final", agent.gassom.sigma_final),
      AEC_FIELD("gassom", "eta_initial", agent.gassom.eta_initial),
      AEC_FIELD("gassom", "eta_final", agent.gassom.eta_final),
      AEC_FIELD("gassom", "anneal_steps", agent.gassom.anneal_steps),
      AEC_FIELD("gassom", "learn", agent.learn_dictionaries),

      AEC_FIELD("policy", "temperature", agent.temperature),

      AEC_FIELD("learner", "discount", agent.learner.discount),
      AEC_FIELD("learner", "trace_decay", agent.learner.trace_decay),
      AEC_FIELD("learner", "critic_rate", agent.learner.critic_rate),
      AEC_FIELD("learner", "advantage_rate", agent.learner.advantage_rate),
      AEC_FIELD("learner", "actor_rate", agent.learner.actor_rate),
      AEC_FIELD("learner", "reward_rate", agent.learner.reward_rate),
      AEC_FIELD("learner", "variance_floor", agent.learner.variance_floor),

      AEC_FIELD("evaluation", "scenes", eval.scenes),
      AEC_FIELD("evaluation", "fixations", eval.fixations),
      AEC_FIELD("evaluation", "fixations_per_scene", eval.fixations_per_scene),
      AEC_FIELD("evaluation", "steps_per_fixation", eval.steps_per_fixation),
      AEC_FIELD("evaluation", "initial_residual_range", eval.initial_residual_range),
      AEC_FIELD("evaluation", "conflict_min_separation", eval.conflict_min_separation),
      AEC_FIELD("evaluation", "conflict_max_separation", eval.conflict_max_separation),
      AEC_FIELD("evaluation", "conflict_extent", eval.conflict_extent),
      AEC_FIELD("evaluation", "plane_disparity_range", eval.plane_disparity_range),

      AEC_FIELD("probe", "min_disparity", probe.min_disparity),
      AEC_FIELD("probe", "max_disparity", probe.max_disparity),
      AEC_FIELD("probe", "probes_per_disparity", probe.probes_per_disparity),
  };
  return all;
}

#undef AEC_FIELD

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("invalid configuration: " + what);
}

}  // namespace

void validate(const ProtocolConfig& c) {
  require(c.scenes_per_run > 0 && c.fixations_per_scene > 0 && c.steps_per_fixation > 0, "counts must be positive");
  require(c.test_scenes > 0, "test_scenes must be positive");
  require(c.initial_residual_range >= 0 && c.initial_residual_range <= c.limits.max_vergence &&
              c.eval.initial_residual_range >= 0 && c.eval.initial_residual_range <= c.limits.max_vergence,
          "initial residual ranges must lie in [0, max_vergence]");
  require(c.checkpoint_interval >= 0 && c.metrics_interval > 0, "intervals out of range");
  require(c.workers > 0, "workers must be positive");
  require(c.limits.max_disparity >= 0 && c.limits.max_vergence > 0, "environment limits out of range");
  const int min_side = minimum_scene_side(c.limits);
  require(c.scene_rows >= min_side && c.scene_cols >= min_side,
          "scenes must be at least " + std::to_string(min_side) + " pixels per side");
  require(c.texture.min_gratings >= 0 && c.texture.max_gratings >= c.texture.min_gratings, "grating counts");
  require(c.texture.min_period > 0 && c.texture.max_period >= c.texture.min_period, "grating periods");
  require(c.curriculum.uniform_fraction >= 0 && c.curriculum.uniform_fraction <= 1, "uniform_fraction");
  require(c.curriculum.pinned_fraction >= 0 && c.curriculum.pinned_fraction <= 1, "pinned_fraction");
  require(c.curriculum.plane_disparity_range <= c.limits.max_disparity &&
              c.curriculum.conflict_disparity_range <= c.limits.max_disparity,
          "curriculum disparities exceed max_disparity");
  require(c.curriculum.min_extent >= 20 && c.curriculum.max_extent <= 80 &&
              c.curriculum.min_extent <= c.curriculum.max_extent,
          "foreground extents must lie in [20, 80]");
  require(c.agent.gassom.responsibility_temperature > 0 && c.agent.gassom.sigma_initial > 0 &&
              c.agent.gassom.sigma_final > 0 && c.agent.gassom.eta_initial >= 0 && c.agent.gassom.eta_final >= 0,
          "gassom parameters");
  require(c.agent.temperature > 0, "temperature must be positive");
  require(c.agent.learner.reward_rate > 0 && c.agent.learner.reward_rate <= 1, "reward_rate");
  require(c.agent.learner.variance_floor > 0, "variance_floor");
  require(c.eval.fixations > 0 && c.eval.fixations_per_scene > 0 && c.eval.steps_per_fixation > 0,
          "evaluation counts");
  require(c.eval.conflict_extent >= 20 && c.eval.conflict_extent <= 80, "evaluation conflict extent");
  require(c.eval.conflict_min_separation >= 0 && c.eval.conflict_max_separation >= c.eval.conflict_min_separation,
          "conflict separations");
  require(c.probe.min_disparity <= c.probe.max_disparity && c.probe.probes_per_disparity > 0, "probe range");
  require(std::max(std::abs(c.probe.min_disparity), std::abs(c.probe.max_disparity)) <= c.limits.max_vergence,
          "probe disparities exceed max_vergence");
}

ProtocolConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw std::invalid_argument(std::string("malformed configuration: ") + e.what());
  }

  std::map<std::string, std::map<std::string, const Field*>> index;
  for (const Field& f : fields()) index[f.section][f.key] = &f;

  ProtocolConfig config;
  for (const auto& [section, body] : tree) {
    auto sec = index.find(section);
    if (sec == index.end()) throw std::invalid_argument("unknown configuration section [" + section + "]");
    if (body.empty() && !body.data().empty())
      throw std::invalid_argument("key '" + section + "' outside of a section");
    for (const auto& [key, value] : body) {
      auto f = sec->second.find(key);
      if (f == sec->second.end())
        throw std::invalid_argument("unknown configuration key " + section + "." + key);
      try {
        f->second->set(config, value.data());
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(section + "." + key + ": " + e.what());
      }
    }
  }
  validate(config);
  return config;
}

ProtocolConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open configuration " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_ini(const ProtocolConfig& config) {
  std::string out;
  std::string current;
  for (const Field& f : fields()) {
    if (f.section != current) {
      if (!current.empty()) out += '\n';
      out += '[' + f.section + "]\n";
      current = f.section;
    }
    out += f.key + " = " + f.get(config) + '\n';
  }
  return out;
}

}  // namespace aec
