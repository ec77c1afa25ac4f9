#pragma once

#include <vector>

#include "ideolens/corpus.hpp"
#include "ideolens/types.hpp"

namespace ideolens {

// Anything that turns tweets into per-party probability rows. The production
// implementation is TweetClassifier; tests substitute cheap stand-ins.
class TweetScorer {
 public:
  virtual ~TweetScorer() = default;
  // One row per tweet, components in catalog order, each row summing to 1.
  virtual Matd score(const std::vector<const Tweet*>& tweets) const = 0;
  virtual int n_classes() const = 0;
};

}  // namespace ideolens
