#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ideolens {

enum class Task { party, pole };

inline const char* task_name(Task t) { return t == Task::party ? "party" : "pole"; }

// One row of pipeline output. Empty party/pole means the method abstained for
// that user. confidence = 1 - normalized_distance.
struct Prediction {
  std::string user_id;
  std::string party;  // empty for pole-only methods or abstentions
  std::string pole;   // empty for abstentions
  double confidence = 0.0;
  double normalized_distance = 1.0;
};

void save_predictions_csv(const std::vector<Prediction>& preds,
                          const std::filesystem::path& path, std::uint64_t config_hash,
                          std::uint64_t seed);

std::vector<Prediction> load_predictions_csv(const std::filesystem::path& path);

}  // namespace ideolens
