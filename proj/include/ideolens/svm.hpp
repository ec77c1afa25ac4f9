#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ideolens/types.hpp"

namespace ideolens {

struct SvcConfig {
  double C = 1.0;         // hinge-loss penalty
  double tol = 1e-4;      // projected-gradient stopping threshold
  int max_passes = 1000;  // full coordinate sweeps per binary problem
  double bias_scale = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Max-margin linear classifier: one independent L1-hinge SVM per class
// (one-vs-rest), solved by dual coordinate descent, with argmax decision
// values at prediction time. Classes are kept sorted, so exact ties go to
// the lexicographically smaller label.
class LinearSvc {
 public:
  static LinearSvc train(const Matd& x, const std::vector<std::string>& labels,
                         const SvcConfig& cfg = {});

  const std::vector<std::string>& classes() const { return classes_; }
  // One column per class, rows aligned with x.
  Matd decision_values(const Matd& x) const;
  std::vector<std::string> predict(const Matd& x) const;

 private:
  std::vector<std::string> classes_;   // sorted
  Matd weights_;                       // classes x (dim + 1); last column is bias
  double bias_scale_ = 1.0;
};

}  // namespace ideolens
