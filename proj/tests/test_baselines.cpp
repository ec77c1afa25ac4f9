// Tests for the comparison methods: random and majority classifiers,
// retweet-based representations, confident-mistake feedback, and the
// supervised predictor glue.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ideolens/baselines.hpp"
#include "ideolens/errors.hpp"
#include "ideolens/rng.hpp"

using namespace ideolens;

namespace {

PartyCatalog eight_parties() {
  std::vector<Party> parties;
  const char* poles[] = {"L", "L", "L", "M", "M", "R", "R", "R"};
  for (int i = 0; i < 8; ++i)
    parties.push_back({"party" + std::to_string(i), poles[i], "pivot" + std::to_string(i)});
  return PartyCatalog(parties);
}

Tweet retweet(const std::string& id, const std::string& user, const std::string& source) {
  Tweet t;
  t.tweet_id = id;
  t.user_id = user;
  t.text = "rt";
  t.created_at = 1'500'000'000;
  t.is_retweet = true;
  t.retweet_of_user = source;
  return t;
}

Tweet plain_tweet(const std::string& id, const std::string& user) {
  Tweet t;
  t.tweet_id = id;
  t.user_id = user;
  t.text = "hello";
  t.created_at = 1'500'000'000;
  return t;
}

// Three parties; each "loyal" user retweets only their pivot, each "mixed"
// user mostly their pivot plus one off-party account, plus two silent users.
Corpus retweet_corpus() {
  Corpus corpus;
  corpus.catalog = PartyCatalog({{"blue", "L", "pb"}, {"green", "M", "pg"}, {"red", "R", "pr"}});
  int serial = 0;
  const auto add_user = [&](const std::string& id, const std::vector<std::string>& sources) {
    Timeline tl;
    tl.user_id = id;
    for (const std::string& source : sources)
      tl.tweets.push_back(retweet("t" + std::to_string(serial++), id, source));
    tl.tweets.push_back(plain_tweet("t" + std::to_string(serial++), id));
    corpus.users[id] = std::move(tl);
  };
  const char* pivots[] = {"pb", "pg", "pr"};
  for (int party = 0; party < 3; ++party) {
    const std::string tag = corpus.catalog.party(party).label;
    for (int u = 0; u < 4; ++u) {
      std::vector<std::string> sources(5 + u, pivots[party]);
      if (u >= 2) sources.push_back("celebrity");  // shared off-party account
      add_user(tag + "_user" + std::to_string(u), sources);
    }
  }
  add_user("zz_silent_a", {});
  add_user("zz_silent_b", {});
  return corpus;
}

// Scores keyed by tweet id; two columns.
class TableScorer : public TweetScorer {
 public:
  explicit TableScorer(std::map<std::string, RowVecd> rows, int n_classes)
      : rows_(std::move(rows)), n_classes_(n_classes) {}

  Matd score(const std::vector<const Tweet*>& tweets) const override {
    Matd out(static_cast<Eigen::Index>(tweets.size()), n_classes_);
    for (std::size_t i = 0; i < tweets.size(); ++i)
      out.row(static_cast<Eigen::Index>(i)) = rows_.at(tweets[i]->tweet_id);
    return out;
  }
  int n_classes() const override { return n_classes_; }

 private:
  std::map<std::string, RowVecd> rows_;
  int n_classes_;
};

}  // namespace

TEST_SUITE("random baseline") {
  TEST_CASE("draws are uniform within three sigma") {
    const PartyCatalog catalog = eight_parties();
    std::vector<std::string> users;
    for (int i = 0; i < 10'000; ++i) users.push_back("u" + std::to_string(i));
    const auto preds = predict_random(users, catalog, Task::party, 99);
    std::map<std::string, int> counts;
    for (const auto& p : preds) {
      ++counts[p.party];
      CHECK(p.pole == catalog.pole_of(p.party));
    }
    const double expected = 10'000.0 / 8.0;
    const double sigma = std::sqrt(10'000.0 * (1.0 / 8.0) * (7.0 / 8.0));
    for (const auto& [label, n] : counts) {
      CHECK(n > expected - 3.0 * sigma);
      CHECK(n < expected + 3.0 * sigma);
    }
  }

  TEST_CASE("reruns with one seed are identical, new seeds differ") {
    const PartyCatalog catalog = eight_parties();
    std::vector<std::string> users;
    for (int i = 0; i < 200; ++i) users.push_back("u" + std::to_string(i));
    const auto a = predict_random(users, catalog, Task::party, 4);
    const auto b = predict_random(users, catalog, Task::party, 4);
    const auto c = predict_random(users, catalog, Task::party, 5);
    int differs = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].party == b[i].party);
      differs += a[i].party != c[i].party;
    }
    CHECK(differs > 0);
  }

  TEST_CASE("a single label degenerates to a constant") {
    const PartyCatalog catalog({{"only", "L", "p"}});
    const auto preds = predict_random({"u1", "u2", "u3"}, catalog, Task::party, 0);
    for (const auto& p : preds) CHECK(p.party == "only");
  }

  TEST_CASE("the pole task draws poles and leaves parties empty") {
    const PartyCatalog catalog = eight_parties();
    const auto preds = predict_random({"u1", "u2"}, catalog, Task::pole, 1);
    for (const auto& p : preds) {
      CHECK(p.party.empty());
      CHECK(catalog.has_pole(p.pole));
    }
  }

  TEST_CASE("an empty catalog cannot predict") {
    CHECK_THROWS_AS(predict_random({"u1"}, PartyCatalog{}, Task::party, 0), ValidationError);
  }
}

TEST_SUITE("majority baseline") {
  TEST_CASE("predicts the modal training label everywhere") {
    const PartyCatalog catalog = eight_parties();
    const std::vector<std::string> train = {"party3", "party1", "party3", "party3", "party0"};
    const auto preds = predict_majority(train, {"u1", "u2"}, catalog, Task::party);
    for (const auto& p : preds) {
      CHECK(p.party == "party3");
      CHECK(p.pole == "M");
    }
  }

  TEST_CASE("count ties go to the alphabetically first label") {
    const PartyCatalog catalog = eight_parties();
    const std::vector<std::string> train = {"party5", "party2", "party2", "party5"};
    const auto preds = predict_majority(train, {"u1"}, catalog, Task::party);
    CHECK(preds[0].party == "party2");
  }

  TEST_CASE("pole task counts poles") {
    const PartyCatalog catalog = eight_parties();
    const auto preds = predict_majority({"R", "L", "R"}, {"u1"}, catalog, Task::pole);
    CHECK(preds[0].party.empty());
    CHECK(preds[0].pole == "R");
  }

  TEST_CASE("empty or unknown training labels are rejected") {
    const PartyCatalog catalog = eight_parties();
    CHECK_THROWS_AS(predict_majority({}, {"u1"}, catalog, Task::party), ValidationError);
    CHECK_THROWS_AS(predict_majority({"nosuch"}, {"u1"}, catalog, Task::party), ValidationError);
    CHECK_THROWS_AS(predict_majority({"party1"}, {"u1"}, catalog, Task::pole), ValidationError);
  }
}

TEST_SUITE("retweet representations") {
  TEST_CASE("counts retweeted accounts per user") {
    const Corpus corpus = retweet_corpus();
    const auto rvs = retweet_vectors(corpus);
    REQUIRE(rvs.size() == corpus.users.size());

    std::int64_t total = 0, corpus_retweets = 0;
    for (const auto& rv : rvs)
      for (const auto& [account, n] : rv.counts) {
        CHECK(n > 0);
        total += n;
      }
    for (const auto& [id, tl] : corpus.users)
      for (const Tweet& t : tl.tweets) corpus_retweets += t.is_retweet;
    CHECK(total == corpus_retweets);

    const auto& first = rvs.front();  // blue_user0: 5 pivot retweets
    CHECK(first.user_id == "blue_user0");
    CHECK(first.counts.at("pb") == 5);
    CHECK(first.counts.size() == 1);
    CHECK(rvs.back().counts.empty());  // zz_silent_b
  }

  TEST_CASE("feature rows are unit length and pivots are anchors") {
    const Corpus corpus = retweet_corpus();
    const RetweetFeatures f = retweet_features(corpus);
    CHECK(std::is_sorted(f.accounts.begin(), f.accounts.end()));
    // celebrity + three pivot accounts
    CHECK(f.accounts == std::vector<std::string>{"celebrity", "pb", "pg", "pr"});
    for (Eigen::Index i = 0; i < f.users.rows(); ++i) {
      const double norm = f.users.row(i).norm();
      CHECK((norm == 0.0 || std::abs(norm - 1.0) < 1e-12));
    }
    REQUIRE(f.pivots.rows() == 3);
    CHECK(f.pivots(0, 1) == 1.0);  // blue -> column "pb"
    CHECK(f.pivots.row(0).sum() == 1.0);
  }

  TEST_CASE("clustering over retweets recovers parties; silent users fall back") {
    const Corpus corpus = retweet_corpus();
    ClusteringConfig cfg;
    cfg.use_pairwise_projection = true;
    cfg.standardize = false;
    cfg.algorithm = "mean_shift";
    cfg.seed = 17;
    const auto preds = predict_retweets(corpus, cfg, Task::party);
    REQUIRE(preds.size() == corpus.users.size());

    std::map<std::string, Prediction> by_user;
    for (const auto& p : preds) by_user[p.user_id] = p;
    for (const auto& [id, tl] : corpus.users) {
      REQUIRE(by_user.count(id) == 1);
      if (id.rfind("zz_silent", 0) == 0) {
        CHECK(by_user[id].party == "blue");  // alphabetically first party
        CHECK(by_user[id].confidence == 0.0);
      } else {
        const std::string expected = id.substr(0, id.find('_'));
        CHECK(by_user[id].party == expected);
      }
    }
  }

  TEST_CASE("pole task maps fallback users through the catalog") {
    const Corpus corpus = retweet_corpus();
    ClusteringConfig cfg;
    cfg.use_pairwise_projection = true;
    cfg.standardize = false;
    cfg.algorithm = "kmeans";
    cfg.n_clusters = 3;
    cfg.seed = 2;
    const auto preds = predict_retweets(corpus, cfg, Task::pole);
    for (const auto& p : preds) {
      CHECK(p.party.empty());
      if (p.user_id.rfind("zz_silent", 0) == 0) CHECK(p.pole == "L");  // pole of "blue"
    }
  }
}

TEST_SUITE("confident-mistake feedback") {
  TEST_CASE("keeps only confident wrong predictions, labeled with the truth") {
    const PartyCatalog catalog({{"alpha", "L", "pa"}, {"bravo", "R", "pb"}});
    std::map<std::string, RowVecd> rows;
    rows["t1"] = (RowVecd(2) << 0.9, 0.1).finished();   // confident, wrong (truth bravo)
    rows["t2"] = (RowVecd(2) << 0.35, 0.3).finished();  // wrong but unconfident
    rows["t3"] = (RowVecd(2) << 0.8, 0.2).finished();   // confident and right
    const TableScorer scorer(rows, 2);

    LabeledTweetSet labeled;
    labeled.items.push_back({plain_tweet("t1", "u1"), "bravo", Provenance::pivot});
    labeled.items.push_back({plain_tweet("t2", "u2"), "bravo", Provenance::pivot});
    labeled.items.push_back({plain_tweet("t3", "u3"), "alpha", Provenance::pivot});

    const LabeledTweetSet fed = supervised_feedback_enrichment(scorer, labeled, catalog, 0.5);
    REQUIRE(fed.items.size() == 1);
    CHECK(fed.items[0].tweet.tweet_id == "t1");
    CHECK(fed.items[0].label == "bravo");
    CHECK(fed.items[0].provenance == Provenance::supervised_feedback);
  }

  TEST_CASE("a perfect scorer feeds nothing back") {
    const PartyCatalog catalog({{"alpha", "L", "pa"}, {"bravo", "R", "pb"}});
    std::map<std::string, RowVecd> rows;
    rows["t1"] = (RowVecd(2) << 0.9, 0.1).finished();
    rows["t2"] = (RowVecd(2) << 0.05, 0.95).finished();
    const TableScorer scorer(rows, 2);
    LabeledTweetSet labeled;
    labeled.items.push_back({plain_tweet("t1", "u1"), "alpha", Provenance::pivot});
    labeled.items.push_back({plain_tweet("t2", "u2"), "bravo", Provenance::pivot});
    CHECK(supervised_feedback_enrichment(scorer, labeled, catalog, 0.5).items.empty());
  }

  TEST_CASE("bounds and label validity are enforced") {
    const PartyCatalog catalog({{"alpha", "L", "pa"}, {"bravo", "R", "pb"}});
    const TableScorer scorer({{"t1", (RowVecd(2) << 0.9, 0.1).finished()}}, 2);
    LabeledTweetSet labeled;
    labeled.items.push_back({plain_tweet("t1", "u1"), "alpha", Provenance::pivot});
    CHECK_THROWS_AS(supervised_feedback_enrichment(scorer, labeled, catalog, 0.0), ConfigError);
    CHECK_THROWS_AS(supervised_feedback_enrichment(scorer, labeled, catalog, 1.5), ConfigError);

    LabeledTweetSet ghost;
    ghost.items.push_back({plain_tweet("t1", "u1"), "nosuch", Provenance::pivot});
    CHECK_THROWS_AS(supervised_feedback_enrichment(scorer, ghost, catalog, 0.5), ValidationError);

    const TableScorer narrow({{"t1", (RowVecd(1) << 1.0).finished()}}, 1);
    CHECK_THROWS_AS(supervised_feedback_enrichment(narrow, labeled, catalog, 0.5),
                    ValidationError);
  }
}

TEST_SUITE("supervised predictor") {
  TEST_CASE("labels users through the trained classifier with margin confidence") {
    const PartyCatalog catalog({{"alpha", "L", "pa"}, {"bravo", "R", "pb"}});
    Rng rng(42);
    Matd train_x(40, 2);
    std::vector<std::string> train_y;
    UserVectors test;
    test.vectors.resize(20, 2);
    for (int i = 0; i < 40; ++i) {
      const bool left = i < 20;
      train_x(i, 0) = (left ? -2.0 : 2.0) + 0.3 * rng.normal();
      train_x(i, 1) = rng.normal();
      train_y.push_back(left ? "alpha" : "bravo");
    }
    for (int i = 0; i < 20; ++i) {
      const bool left = i < 10;
      test.vectors(i, 0) = (left ? -2.0 : 2.0) + 0.3 * rng.normal();
      test.vectors(i, 1) = rng.normal();
      test.user_ids.push_back("u" + std::to_string(100 + i));
    }

    const LinearSvc model = LinearSvc::train(train_x, train_y);
    const auto preds = predict_svc(model, test, catalog, Task::party);
    REQUIRE(preds.size() == 20);
    double max_conf = 0.0;
    for (int i = 0; i < 20; ++i) {
      CHECK(preds[static_cast<std::size_t>(i)].party == (i < 10 ? "alpha" : "bravo"));
      CHECK(preds[static_cast<std::size_t>(i)].pole == (i < 10 ? "L" : "R"));
      const auto& p = preds[static_cast<std::size_t>(i)];
      CHECK(p.confidence == doctest::Approx(1.0 - p.normalized_distance));
      CHECK(p.confidence >= 0.0);
      max_conf = std::max(max_conf, p.confidence);
    }
    CHECK(max_conf == doctest::Approx(1.0));
  }

  TEST_CASE("pole-task models must predict poles") {
    const PartyCatalog catalog({{"alpha", "L", "pa"}, {"bravo", "R", "pb"}});
    Matd x(4, 1);
    x << -1.0, -0.5, 0.5, 1.0;
    UserVectors users;
    users.user_ids = {"u1", "u2", "u3", "u4"};
    users.vectors = x;

    const LinearSvc poles = LinearSvc::train(x, {"L", "L", "R", "R"});
    const auto preds = predict_svc(poles, users, catalog, Task::pole);
    CHECK(preds[0].party.empty());
    CHECK(preds[0].pole == "L");
    CHECK(preds[3].pole == "R");

    const LinearSvc parties = LinearSvc::train(x, {"alpha", "alpha", "bravo", "bravo"});
    CHECK_THROWS_AS(predict_svc(parties, users, catalog, Task::pole), ValidationError);
  }
}
