#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "ideolens/corpus.hpp"
#include "ideolens/prediction.hpp"

namespace ideolens {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
  bool precision_defined = true;  // false when the class was never predicted
};

struct EvalReport {
  Task task = Task::party;
  std::vector<std::string> classes;  // catalog order, restricted to labels seen
  std::map<std::string, ClassMetrics> per_class;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  double micro_precision = 0.0, micro_recall = 0.0, micro_f1 = 0.0;
  // Rows follow `classes` (truth); columns follow `classes` plus a final
  // abstained column.
  Eigen::MatrixXi confusion;
  std::int64_t n_users = 0;
  std::int64_t n_abstained = 0;

  nlohmann::json to_json() const;
};

// Scores predictions against task-space truth labels. An abstention counts as
// a false negative for the true class and produces no false positive. Every
// predicted user must have a truth label, and every label must belong to the
// catalog's party (or pole) set.
EvalReport evaluate(const std::vector<Prediction>& preds,
                    const std::map<std::string, std::string>& truth, Task task,
                    const PartyCatalog& catalog);

// Confusion matrix with row/column sums appended as a last row and column.
Eigen::MatrixXi confusion_with_marginals(const EvalReport& report);

struct CurvePoint {
  double threshold = 0.0;
  std::int64_t n_users = 0;
  double micro_f1_party = 0.0;
  double micro_f1_pole = 0.0;
};

// Micro F1 over the subpopulation of users whose normalized pivot distance is
// at most each of `n_points` evenly spaced thresholds ending at 1.
std::vector<CurvePoint> distance_sensitivity(const std::vector<Prediction>& preds,
                                             const std::map<std::string, std::string>& truth_party,
                                             const std::map<std::string, std::string>& truth_pole,
                                             const PartyCatalog& catalog, int n_points);

// Same sweep over a per-user activity count (tweets authored, retweets
// made, ...): point i keeps users with count >= grid[i].
std::vector<CurvePoint> count_sensitivity(const std::vector<Prediction>& preds,
                                          const std::map<std::string, std::string>& truth_party,
                                          const std::map<std::string, std::string>& truth_pole,
                                          const PartyCatalog& catalog,
                                          const std::map<std::string, std::int64_t>& counts,
                                          const std::vector<std::int64_t>& grid);

void save_report_json(const EvalReport& report, const std::filesystem::path& path,
                      std::uint64_t config_hash, std::uint64_t seed);
void save_confusion_csv(const EvalReport& report, const std::filesystem::path& path,
                        std::uint64_t config_hash, std::uint64_t seed);
void save_curve_csv(const std::vector<CurvePoint>& curve, const std::string& threshold_name,
                    const std::filesystem::path& path, std::uint64_t config_hash,
                    std::uint64_t seed);

// Clustering agreement diagnostics used by tests and tooling.
double normalized_mutual_information(const std::vector<int>& a, const std::vector<int>& b);
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace ideolens
