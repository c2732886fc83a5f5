#include "aec/export.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "json.hpp"

#include "aec/image_io.hpp"

namespace aec {
namespace {

std::string num(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse(const std::string& s, const std::filesystem::path& path) {
  T v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError(path.string() + ": cannot parse '" + s + "'");
  return v;
}

std::ofstream open_out(const std::filesystem::path& path, bool append = false) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::vector<std::string> action_labels() {
  std::vector<std::string> labels;
  for (int a : kVergenceActions) labels.push_back(std::to_string(a));
  return labels;
}

std::vector<std::string> option_labels() {
  std::vector<std::string> labels;
  for (int o = 0; o < kNumOptions; ++o) labels.push_back(to_string(static_cast<Option>(o)));
  return labels;
}

std::optional<Option> option_from_string(const std::string& s) {
  for (int o = 0; o < kNumOptions; ++o)
    if (s == to_string(static_cast<Option>(o))) return static_cast<Option>(o);
  return std::nullopt;
}

const char* kTrajectoryHeader =
    "fixation,step,scene,row,col,vergence,ground_truth,action,option,reward_parallel,reward_foveal,"
    "reward_inner_peripheral,reward_outer_peripheral,residual";

std::string format_record(const TrajectoryRecord& r) {
  std::string line = std::to_string(r.fixation) + ',' + std::to_string(r.step) + ',' + r.scene_id + ',' +
                     std::to_string(r.fixation_point.row) + ',' + std::to_string(r.fixation_point.col) + ',' +
                     std::to_string(r.vergence) + ',' + num(r.ground_truth) + ',' + std::to_string(r.action) + ',' +
                     (r.option ? to_string(*r.option) : "") + ',' + num(r.rewards.parallel) + ',' +
                     num(r.rewards.foveal) + ',' + num(r.rewards.inner_peripheral) + ',' +
                     num(r.rewards.outer_peripheral) + ',' + num(r.residual);
  return line;
}

}  // namespace

void write_policy_table(const std::filesystem::path& path, const PolicyTable& table) {
  if (table.values.rows() != static_cast<Eigen::Index>(table.row_labels.size()) ||
      table.values.cols() != static_cast<Eigen::Index>(table.disparities.size()))
    throw std::invalid_argument("policy table labels do not match its shape");
  std::ofstream out = open_out(path);
  out << table.corner;
  for (int d : table.disparities) out << ',' << d;
  out << '\n';
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    out << table.row_labels[r];
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) out << ',' << num(table.values(r, c));
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

PolicyTable read_policy_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  PolicyTable t;
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty table");
  auto header = split(line);
  if (header.size() < 2) throw FormatError(path.string() + ": header has no disparity columns");
  t.corner = header[0];
  for (std::size_t i = 1; i < header.size(); ++i) t.disparities.push_back(parse<int>(header[i], path));
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != header.size()) throw FormatError(path.string() + ": ragged row '" + cells[0] + "'");
    t.row_labels.push_back(cells[0]);
    std::vector<double> row;
    for (std::size_t i = 1; i < cells.size(); ++i) row.push_back(parse<double>(cells[i], path));
    rows.push_back(std::move(row));
  }
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.disparities.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) t.values(r, c) = rows[r][c];
  return t;
}

void write_heat_image(const std::filesystem::path& path, const Eigen::MatrixXd& values, int cell) {
  if (cell <= 0) throw std::invalid_argument("heat image cell size must be positive");
  Image img(values.rows() * cell, values.cols() * cell);
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    const Eigen::Index y = (values.rows() - 1 - r) * cell;
    for (Eigen::Index c = 0; c < values.cols(); ++c)
      img.block(y, c * cell, cell, cell).setConstant(std::clamp(values(r, c), 0.0, 1.0));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_pgm(path, img, 255);
}

std::vector<std::filesystem::path> export_policy_matrix(const PolicyMatrix& m, const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& corner, std::vector<std::string> labels,
                  const Eigen::MatrixXd& values) {
    const auto csv = dir / ("policy_" + name + ".csv");
    const auto pgm = dir / ("policy_" + name + ".pgm");
    write_policy_table(csv, {corner, std::move(labels), m.disparities, values});
    write_heat_image(pgm, values);
    written.push_back(csv);
    written.push_back(pgm);
  };
  emit("vergence", "action", action_labels(), m.vergence);
  emit("greedy", "action", action_labels(), m.greedy);
  if (m.kind == ModelKind::hierarchical) {
    emit("selection", "option", option_labels(), m.selection);
    for (int o = 0; o < kNumOptions; ++o)
      emit(std::string("bottom_") + to_string(static_cast<Option>(o)), "action", action_labels(), m.bottom[o]);
  }
  const auto counts = dir / "probe_counts.csv";
  std::ofstream out = open_out(counts);
  out << "model," << to_string(m.kind) << "\ndisparity,probes\n";
  for (std::size_t k = 0; k < m.disparities.size(); ++k) out << m.disparities[k] << ',' << m.probe_counts[k] << '\n';
  written.push_back(counts);
  return written;
}

PolicyMatrix import_policy_matrix(const std::filesystem::path& dir) {
  PolicyMatrix m;
  std::ifstream in(dir / "probe_counts.csv");
  if (!in) throw std::runtime_error("cannot open " + (dir / "probe_counts.csv").string());
  std::string line;
  std::getline(in, line);
  const auto head = split(line);
  if (head.size() != 2 || head[0] != "model") throw FormatError("probe_counts.csv: missing model line");
  m.kind = model_kind_from_string(head[1]);
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != 2) throw FormatError("probe_counts.csv: malformed row");
    m.disparities.push_back(parse<int>(cells[0], dir / "probe_counts.csv"));
    m.probe_counts.push_back(parse<int>(cells[1], dir / "probe_counts.csv"));
  }
  auto load = [&](const std::string& name, Eigen::Index rows) {
    const auto path = dir / ("policy_" + name + ".csv");
    PolicyTable t = read_policy_table(path);
    if (t.disparities != m.disparities || t.values.rows() != rows)
      throw FormatError(path.string() + ": shape does not match probe_counts.csv");
    return t.values;
  };
  m.vergence = load("vergence", kNumActions);
  m.greedy = load("greedy", kNumActions);
  if (m.kind == ModelKind::hierarchical) {
    m.selection = load("selection", kNumOptions);
    for (int o = 0; o < kNumOptions; ++o)
      m.bottom[o] = load(std::string("bottom_") + to_string(static_cast<Option>(o)), kNumActions);
  }
  return m;
}

void write_trajectories(const std::filesystem::path& path, const std::vector<TrajectoryRecord>& records) {
  TrajectoryLog log(path);
  for (const auto& r : records) log.write(r);
}

std::vector<TrajectoryRecord> read_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kTrajectoryHeader)
    throw FormatError(path.string() + ": not a trajectory table");
  std::vector<TrajectoryRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != 14) throw FormatError(path.string() + ": expected 14 columns");
    TrajectoryRecord r;
    r.fixation = parse<long>(c[0], path);
    r.step = parse<int>(c[1], path);
    r.scene_id = c[2];
    r.fixation_point = {parse<int>(c[3], path), parse<int>(c[4], path)};
    r.vergence = parse<int>(c[5], path);
    r.ground_truth = parse<double>(c[6], path);
    r.action = parse<int>(c[7], path);
    if (!c[8].empty()) {
      r.option = option_from_string(c[8]);
      if (!r.option) throw FormatError(path.string() + ": unknown option '" + c[8] + "'");
    }
    r.rewards = {parse<double>(c[9], path), parse<double>(c[10], path), parse<double>(c[11], path),
                 parse<double>(c[12], path)};
    r.residual = parse<double>(c[13], path);
    records.push_back(std::move(r));
  }
  return records;
}

std::string summary_json(const EvaluationSummary& s, const std::string& model, const std::string& scenes) {
  auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["model"] = model;
  j["scenes"] = scenes;
  j["fixations"] = s.fixations;
  j["median_final_residual"] = finite_or_null(s.median_final_residual);
  j["mean_final_residual"] = finite_or_null(s.mean_final_residual);
  j["convergence_rate"] = s.convergence_rate;
  j["mean_oscillation"] = finite_or_null(s.mean_oscillation);
  if (model == "hierarchical") {
    for (int o = 0; o < kNumOptions; ++o) {
      const std::string name = to_string(static_cast<Option>(o));
      j["selections"][name] = s.selections[o];
      j["mean_selection_step"][name] = finite_or_null(s.mean_selection_step[o]);
    }
  }
  return j.dump(2) + "\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

MetricsLog::MetricsLog(const std::filesystem::path& path, bool append) {
  const bool fresh = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_ = open_out(path, append);
  if (fresh)
    out_ << "steps,fixations,mean_final_abs_residual,convergence_rate,reward_parallel,reward_foveal,"
            "reward_inner_peripheral,reward_outer_peripheral,select_F,select_IP,select_OP\n";
}

void MetricsLog::write(const MetricsRow& r) {
  out_ << r.steps << ',' << r.fixations << ',' << num(r.mean_final_residual) << ',' << num(r.convergence_rate) << ','
       << num(r.mean_rewards.parallel) << ',' << num(r.mean_rewards.foveal) << ','
       << num(r.mean_rewards.inner_peripheral) << ',' << num(r.mean_rewards.outer_peripheral);
  for (double f : r.selection_frequency) out_ << ',' << num(f);
  out_ << '\n' << std::flush;
}

TrajectoryLog::TrajectoryLog(const std::filesystem::path& path, bool append) {
  const bool fresh = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_ = open_out(path, append);
  if (fresh) out_ << kTrajectoryHeader << '\n';
}

void TrajectoryLog::write(const TrajectoryRecord& record) { out_ << format_record(record) << '\n'; }

}  // namespace aec
