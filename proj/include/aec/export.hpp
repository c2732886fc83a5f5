#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "aec/harness.hpp"

namespace aec {

/// A labelled matrix table: header "<corner>,<d0>,<d1>,...", then one row per
/// label. Columns are probe disparities.
struct PolicyTable {
  std::string corner;
  std::vector<std::string> row_labels;
  std::vector<int> disparities;
  Eigen::MatrixXd values;
};

void write_policy_table(const std::filesystem::path& path, const PolicyTable& table);
PolicyTable read_policy_table(const std::filesystem::path& path);

/// Heat image of a table, one cell of `cell` x `cell` pixels per entry,
/// rows flipped so the last label is on top. Entries are clamped to [0, 1].
void write_heat_image(const std::filesystem::path& path, const Eigen::MatrixXd& values, int cell = 8);

/// Writes policy_<name>.csv and policy_<name>.pgm for every matrix the model
/// has (vergence, greedy, and for the hierarchical model selection and the
/// three bottom policies) plus probe_counts.csv. Returns the files written.
std::vector<std::filesystem::path> export_policy_matrix(const PolicyMatrix& matrix, const std::filesystem::path& dir);

/// Inverse of export_policy_matrix.
PolicyMatrix import_policy_matrix(const std::filesystem::path& dir);

void write_trajectories(const std::filesystem::path& path, const std::vector<TrajectoryRecord>& records);
std::vector<TrajectoryRecord> read_trajectories(const std::filesystem::path& path);

/// Structured report of an evaluation run.
std::string summary_json(const EvaluationSummary& summary, const std::string& model, const std::string& scenes);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Appends training metrics rows to a comma-separated file.
class MetricsLog {
 public:
  explicit MetricsLog(const std::filesystem::path& path, bool append = false);
  void write(const MetricsRow& row);

 private:
  std::ofstream out_;
};

/// Streams trajectory records as they are produced.
class TrajectoryLog {
 public:
  explicit TrajectoryLog(const std::filesystem::path& path, bool append = false);
  void write(const TrajectoryRecord& record);

 private:
  std::ofstream out_;
};

}  // namespace aec
