#include "ideolens/baselines.hpp"

#include <algorithm>
#include <limits>

#include "ideolens/errors.hpp"
#include "ideolens/predict.hpp"
#include "ideolens/rng.hpp"

namespace ideolens {

namespace {

std::vector<std::string> task_labels(const PartyCatalog& catalog, Task task) {
  const std::vector<std::string> labels =
      task == Task::party ? catalog.labels() : catalog.poles();
  if (labels.empty()) throw ValidationError("the catalog provides no labels to predict");
  return labels;
}

Prediction constant_prediction(const std::string& user_id, const std::string& label,
                               const PartyCatalog& catalog, Task task) {
  Prediction p;
  p.user_id = user_id;
  if (task == Task::party) {
    p.party = label;
    p.pole = catalog.pole_of(label);
  } else {
    p.pole = label;
  }
  p.confidence = 0.0;
  p.normalized_distance = 1.0;
  return p;
}

}  // namespace

std::vector<Prediction> predict_random(const std::vector<std::string>& user_ids,
                                       const PartyCatalog& catalog, Task task,
                                       std::uint64_t seed) {
  const std::vector<std::string> labels = task_labels(catalog, task);
  Rng rng(derive_seed(seed, "baseline.random"));
  std::vector<Prediction> out;
  out.reserve(user_ids.size());
  for (const std::string& user : user_ids)
    out.push_back(constant_prediction(user, labels[rng.index(labels.size())], catalog, task));
  return out;
}

std::vector<Prediction> predict_majority(const std::vector<std::string>& train_labels,
                                         const std::vector<std::string>& user_ids,
                                         const PartyCatalog& catalog, Task task) {
  if (train_labels.empty()) throw ValidationError("majority baseline needs training labels");
  std::map<std::string, std::int64_t> counts;
  for (const std::string& label : train_labels) {
    const bool known =
        task == Task::party ? catalog.has_label(label) : catalog.has_pole(label);
    if (!known) throw ValidationError("unknown training label: " + label);
    ++counts[label];
  }
  const std::string* mode = nullptr;
  std::int64_t best = 0;
  for (const auto& [label, n] : counts)
    if (n > best) {  // map order makes ties alphabetical
      best = n;
      mode = &label;
    }
  std::vector<Prediction> out;
  out.reserve(user_ids.size());
  for (const std::string& user : user_ids)
    out.push_back(constant_prediction(user, *mode, catalog, task));
  return out;
}

std::vector<RetweetVector> retweet_vectors(const Corpus& corpus) {
  std::vector<RetweetVector> out;
  out.reserve(corpus.users.size());
  for (const auto& [user_id, timeline] : corpus.users) {
    RetweetVector rv;
    rv.user_id = user_id;
    for (const Tweet& tweet : timeline.tweets)
      if (tweet.is_retweet && !tweet.retweet_of_user.empty()) ++rv.counts[tweet.retweet_of_user];
    out.push_back(std::move(rv));
  }
  return out;
}

RetweetFeatures retweet_features(const Corpus& corpus) {
  const std::vector<RetweetVector> rvs = retweet_vectors(corpus);

  std::map<std::string, Eigen::Index> column;
  for (const RetweetVector& rv : rvs)
    for (const auto& [account, n] : rv.counts) column.emplace(account, 0);
  for (const Party& party : corpus.catalog.parties()) column.emplace(party.pivot_user_id, 0);
  RetweetFeatures out;
  out.accounts.reserve(column.size());
  for (auto& [account, idx] : column) {
    idx = static_cast<Eigen::Index>(out.accounts.size());
    out.accounts.push_back(account);
  }

  out.users = Matd::Zero(static_cast<Eigen::Index>(rvs.size()),
                         static_cast<Eigen::Index>(out.accounts.size()));
  for (std::size_t i = 0; i < rvs.size(); ++i) {
    out.user_ids.push_back(rvs[i].user_id);
    for (const auto& [account, n] : rvs[i].counts)
      out.users(static_cast<Eigen::Index>(i), column.at(account)) = static_cast<double>(n);
    const double norm = out.users.row(static_cast<Eigen::Index>(i)).norm();
    if (norm > 0.0) out.users.row(static_cast<Eigen::Index>(i)) /= norm;
  }

  out.pivots = Matd::Zero(corpus.catalog.size(), static_cast<Eigen::Index>(out.accounts.size()));
  for (int p = 0; p < corpus.catalog.size(); ++p)
    out.pivots(p, column.at(corpus.catalog.party(p).pivot_user_id)) = 1.0;
  return out;
}

std::vector<Prediction> predict_retweets(const Corpus& corpus, const ClusteringConfig& cfg,
                                         Task task) {
  const RetweetFeatures features = retweet_features(corpus);
  const std::vector<std::string> labels = task_labels(corpus.catalog, task);

  UserVectors active;
  std::vector<std::string> silent;
  for (std::size_t i = 0; i < features.user_ids.size(); ++i) {
    if (features.users.row(static_cast<Eigen::Index>(i)).norm() > 0.0)
      active.user_ids.push_back(features.user_ids[i]);
    else
      silent.push_back(features.user_ids[i]);
  }
  active.vectors.resize(static_cast<Eigen::Index>(active.user_ids.size()), features.users.cols());
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < features.user_ids.size(); ++i)
    if (features.users.row(static_cast<Eigen::Index>(i)).norm() > 0.0)
      active.vectors.row(row++) = features.users.row(static_cast<Eigen::Index>(i));

  std::vector<Prediction> clustered;
  if (active.user_ids.size() >= 2)
    clustered = predict_clustering(active, features.pivots, corpus.catalog, cfg, task);
  else if (active.user_ids.size() == 1)
    clustered = predict_nearest_pivot(active, features.pivots, corpus.catalog, task);

  // A user with no retweets sits at the zero vector: every pivot ties, so
  // the nearest-pivot fallback resolves to the alphabetically first party.
  std::string fallback_party = corpus.catalog.party(0).label;
  for (const Party& party : corpus.catalog.parties())
    fallback_party = std::min(fallback_party, party.label);

  std::vector<Prediction> out;
  out.reserve(features.user_ids.size());
  std::size_t a = 0, s = 0;
  while (a < clustered.size() || s < silent.size()) {
    const bool take_active =
        s >= silent.size() || (a < clustered.size() && clustered[a].user_id < silent[s]);
    if (take_active) {
      out.push_back(clustered[a++]);
    } else {
      const std::string label =
          task == Task::party ? fallback_party : corpus.catalog.pole_of(fallback_party);
      out.push_back(constant_prediction(silent[s++], label, corpus.catalog, task));
    }
  }
  return out;
}

LabeledTweetSet supervised_feedback_enrichment(const TweetScorer& scorer,
                                               const LabeledTweetSet& labeled,
                                               const PartyCatalog& catalog, double threshold) {
  if (!(threshold > 0.0) || threshold > 1.0)
    throw ConfigError("feedback threshold must lie in (0, 1]");
  if (scorer.n_classes() != catalog.size())
    throw ValidationError("scorer classes do not match the catalog");

  std::vector<const Tweet*> tweets;
  tweets.reserve(labeled.items.size());
  for (const auto& item : labeled.items) {
    if (!catalog.has_label(item.label))
      throw ValidationError("unknown ground-truth label: " + item.label);
    tweets.push_back(&item.tweet);
  }

  LabeledTweetSet out;
  if (tweets.empty()) return out;
  const Matd scores = scorer.score(tweets);
  for (std::size_t i = 0; i < labeled.items.size(); ++i) {
    Eigen::Index argmax = 0;
    const double best = scores.row(static_cast<Eigen::Index>(i)).maxCoeff(&argmax);
    if (best < threshold) continue;
    if (catalog.party(static_cast<int>(argmax)).label == labeled.items[i].label) continue;
    out.items.push_back(
        {labeled.items[i].tweet, labeled.items[i].label, Provenance::supervised_feedback});
  }
  return out;
}

std::vector<Prediction> predict_svc(const LinearSvc& model, const UserVectors& users,
                                    const PartyCatalog& catalog, Task task) {
  for (const std::string& cls : model.classes()) {
    const bool known = task == Task::party ? catalog.has_label(cls) : catalog.has_pole(cls);
    if (!known) throw ValidationError("svc class outside the catalog: " + cls);
  }
  const Matd scores = model.decision_values(users.vectors);

  std::vector<std::size_t> best(users.user_ids.size(), 0);
  std::vector<double> margin(users.user_ids.size(), 0.0);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index top = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c)
      if (scores(i, c) > scores(i, top)) top = c;
    double runner_up = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < scores.cols(); ++c)
      if (c != top) runner_up = std::max(runner_up, scores(i, c));
    best[static_cast<std::size_t>(i)] = static_cast<std::size_t>(top);
    const double m = scores(i, top) - runner_up;
    margin[static_cast<std::size_t>(i)] = m;
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }

  const double span = hi - lo;
  std::vector<Prediction> out;
  out.reserve(users.user_ids.size());
  for (std::size_t i = 0; i < users.user_ids.size(); ++i) {
    Prediction p;
    p.user_id = users.user_ids[i];
    const std::string& label = model.classes()[best[i]];
    if (task == Task::party) {
      p.party = label;
      p.pole = catalog.pole_of(label);
    } else {
      p.pole = label;
    }
    p.normalized_distance = span > 0.0 ? (hi - margin[i]) / span : 0.0;
    p.confidence = 1.0 - p.normalized_distance;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace ideolens
