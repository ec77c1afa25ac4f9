// Tests for the character encoder and the tweet-level party classifier:
// distant-supervision set construction, training on separable synthetic
// text, determinism, class-order equivariance, and artifact round trips.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ideolens/classifier.hpp"
#include "ideolens/errors.hpp"
#include "ideolens/rng.hpp"
#include "test_util.hpp"

using namespace ideolens;
using testutil::TempDir;
using testutil::slurp;

namespace {

Tweet make_tweet(std::string id, std::string text) {
  Tweet t;
  t.tweet_id = std::move(id);
  t.user_id = "u_" + t.tweet_id;
  t.text = std::move(text);
  t.created_at = 1'500'000'000;
  return t;
}

// Word pools over disjoint character sets, so a char-level model can
// separate the classes from very little data.
const std::vector<std::string> kPoolA = {"abba", "cafe", "dace", "bead", "faded", "edba"};
const std::vector<std::string> kPoolB = {"moon", "prom", "romp", "nomon", "porr", "qonm"};
const std::vector<std::string> kPoolC = {"wxyz", "zyxw", "xyzzy", "wzy", "yzwx", "zwxy"};

std::string sentence(Rng& rng, const std::vector<std::string>& pool, int n_words) {
  std::string out;
  for (int i = 0; i < n_words; ++i) {
    if (i > 0) out += ' ';
    out += pool[rng.index(pool.size())];
  }
  return out;
}

LabeledTweetSet make_set(const std::vector<std::pair<std::string, const std::vector<std::string>*>>& parties,
                         int per_party, Rng& rng) {
  LabeledTweetSet set;
  int id = 0;
  for (const auto& [label, pool] : parties)
    for (int i = 0; i < per_party; ++i)
      set.items.push_back({make_tweet("t" + std::to_string(id++), sentence(rng, *pool, 6)), label,
                           Provenance::pivot});
  return set;
}

ClassifierConfig tiny_config(std::uint64_t seed) {
  ClassifierConfig cfg;
  cfg.embedding_dim = 12;
  cfg.conv_filters = 24;
  cfg.conv_width = 5;
  cfg.pool_width = 2;
  cfg.transformer_layers = 1;
  cfg.attention_heads = 2;
  cfg.model_dim = 24;
  cfg.ffn_dim = 48;
  cfg.dense_dim = 16;
  cfg.dropout = 0.1;
  cfg.max_len = 48;
  cfg.epochs = 8;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-3;
  cfg.early_stop_patience = 3;
  cfg.seed = seed;
  return cfg;
}

double eval_accuracy(const TweetClassifier& clf, const LabeledTweetSet& set,
                     const PartyCatalog& catalog) {
  std::vector<const Tweet*> ptrs;
  std::vector<int> y;
  for (const auto& item : set.items) {
    ptrs.push_back(&item.tweet);
    y.push_back(catalog.index_of(item.label));
  }
  const Matd p = clf.score(ptrs);
  int hits = 0;
  for (Eigen::Index b = 0; b < p.rows(); ++b) {
    Eigen::Index arg = -1;
    p.row(b).maxCoeff(&arg);
    if (static_cast<int>(arg) == y[static_cast<std::size_t>(b)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

}  // namespace

TEST_SUITE("pivot training set") {
  TEST_CASE("takes the most recent tweets of every pivot, capped per party") {
    Corpus corpus;
    corpus.catalog = PartyCatalog({{"alpha", "L", "pa"}, {"bravo", "R", "pb"}});
    Timeline pa;
    pa.user_id = "pa";
    pa.tweets = {make_tweet("a3", "newest"), make_tweet("a2", "middle"), make_tweet("a1", "oldest")};
    Timeline pb;
    pb.user_id = "pb";
    pb.tweets = {make_tweet("b2", "late"), make_tweet("b1", "early")};
    corpus.pivots["alpha"] = pa;
    corpus.pivots["bravo"] = pb;

    const LabeledTweetSet set = build_pivot_training_set(corpus, 2);
    const auto counts = set.label_counts();
    CHECK(counts.at("alpha") == 2);
    CHECK(counts.at("bravo") == 2);
    // Most recent first, so the cap drops the oldest tweet.
    CHECK(set.items[0].tweet.tweet_id == "a3");
    CHECK(set.items[1].tweet.tweet_id == "a2");
    CHECK(set.items[0].label == "alpha");
    CHECK(set.items[2].label == "bravo");
    for (const auto& item : set.items) CHECK(item.provenance == Provenance::pivot);
  }

  TEST_CASE("a party without pivot tweets is an error") {
    Corpus corpus;
    corpus.catalog = PartyCatalog({{"alpha", "L", "pa"}, {"bravo", "R", "pb"}});
    Timeline pa;
    pa.user_id = "pa";
    pa.tweets = {make_tweet("a1", "hello")};
    corpus.pivots["alpha"] = pa;
    CHECK_THROWS_AS(build_pivot_training_set(corpus, 10), ValidationError);
    CHECK_THROWS_AS(build_pivot_training_set(corpus, 0), ConfigError);
  }
}

TEST_SUITE("char encoder") {
  TEST_CASE("indexes characters by frequency, ties by code point") {
    LabeledTweetSet set;
    set.items.push_back({make_tweet("1", "aabb"), "x", Provenance::pivot});
    set.items.push_back({make_tweet("2", "abc"), "x", Provenance::pivot});
    const CharEncoder enc = CharEncoder::fit(set, 1, 6);
    // Frequencies: a=3, b=3, c=1. The a/b tie resolves by code point.
    REQUIRE(enc.chars() == std::vector<char32_t>{U'a', U'b', U'c'});
    CHECK(enc.vocab_size() == 5);  // pad + unknown + 3 characters

    const std::vector<int> ids = enc.encode("bda");
    CHECK(ids == std::vector<int>{3, 1, 2, 0, 0, 0});  // d is unknown, tail is padding
  }

  TEST_CASE("frequency floor drops rare characters") {
    LabeledTweetSet set;
    set.items.push_back({make_tweet("1", "aabbc"), "x", Provenance::pivot});
    const CharEncoder enc = CharEncoder::fit(set, 2, 4);
    CHECK(enc.chars() == std::vector<char32_t>{U'a', U'b'});
    CHECK(enc.encode("cab") == std::vector<int>{1, 2, 3, 0});
  }

  TEST_CASE("truncates at max_len and handles multi-byte characters") {
    LabeledTweetSet set;
    set.items.push_back({make_tweet("1", "èèà"), "x", Provenance::pivot});
    const CharEncoder enc = CharEncoder::fit(set, 1, 2);
    CHECK(enc.chars() == std::vector<char32_t>{U'è', U'à'});
    CHECK(enc.encode("àèè") == std::vector<int>{3, 2});  // third character truncated
  }

  TEST_CASE("json round trip preserves the mapping") {
    LabeledTweetSet set;
    set.items.push_back({make_tweet("1", "ciao à"), "x", Provenance::pivot});
    const CharEncoder enc = CharEncoder::fit(set, 1, 16);
    const CharEncoder back = CharEncoder::from_json(enc.to_json());
    CHECK(back.max_len() == enc.max_len());
    CHECK(back.chars() == enc.chars());
    CHECK(back.encode("oàzc") == enc.encode("oàzc"));
  }

  TEST_CASE("rejects bad parameters") {
    LabeledTweetSet set;
    CHECK_THROWS_AS(CharEncoder::fit(set, 0, 10), ConfigError);
    CHECK_THROWS_AS(CharEncoder::fit(set, 1, 0), ConfigError);
  }
}

TEST_SUITE("classifier training") {
  TEST_CASE("learns separable two-party text") {
    const PartyCatalog catalog({{"alpha", "L", "pa"}, {"bravo", "R", "pb"}});
    Rng rng(11);
    const LabeledTweetSet train =
        make_set({{"alpha", &kPoolA}, {"bravo", &kPoolB}}, 240, rng);
    const LabeledTweetSet val = make_set({{"alpha", &kPoolA}, {"bravo", &kPoolB}}, 40, rng);
    const CharEncoder enc = CharEncoder::fit(train, 1, 48);
    const TweetClassifier clf = TweetClassifier::train(train, val, enc, tiny_config(7), catalog);

    CHECK(clf.n_classes() == 2);
    CHECK(clf.class_labels() == std::vector<std::string>{"alpha", "bravo"});
    CHECK(!clf.history().empty());
    CHECK(clf.history().size() <= 8);
    CHECK(eval_accuracy(clf, val, catalog) >= 0.95);

    // Scores are proper distributions, even for degenerate inputs.
    const Tweet empty = make_tweet("e", "");
    const Tweet unknown = make_tweet("u", "ZZZZ 0123");
    for (const Tweet* t : {&empty, &unknown}) {
      const Vecd p = clf.classify(*t);
      CHECK(p.minCoeff() >= 0.0);
      CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  TEST_CASE("same seed reproduces the training trace bit for bit") {
    const PartyCatalog catalog({{"alpha", "L", "pa"}, {"bravo", "R", "pb"}});
    Rng rng(3);
    const LabeledTweetSet train = make_set({{"alpha", &kPoolA}, {"bravo", &kPoolB}}, 48, rng);
    const LabeledTweetSet val = make_set({{"alpha", &kPoolA}, {"bravo", &kPoolB}}, 16, rng);
    const CharEncoder enc = CharEncoder::fit(train, 1, 48);
    ClassifierConfig cfg = tiny_config(21);
    cfg.epochs = 3;

    const TweetClassifier a = TweetClassifier::train(train, val, enc, cfg, catalog);
    const TweetClassifier b = TweetClassifier::train(train, val, enc, cfg, catalog);
    REQUIRE(a.history().size() == b.history().size());
    for (std::size_t i = 0; i < a.history().size(); ++i) {
      CHECK(a.history()[i].train_loss == b.history()[i].train_loss);
      CHECK(a.history()[i].val_accuracy == b.history()[i].val_accuracy);
    }
    const Tweet probe = make_tweet("p", "cafe moon bead");
    CHECK(a.classify(probe) == b.classify(probe));
  }

  TEST_CASE("retraining with empty enrichment equals plain training") {
    const PartyCatalog catalog({{"alpha", "L", "pa"}, {"bravo", "R", "pb"}});
    Rng rng(5);
    const LabeledTweetSet train = make_set({{"alpha", &kPoolA}, {"bravo", &kPoolB}}, 40, rng);
    const CharEncoder enc = CharEncoder::fit(train, 1, 48);
    ClassifierConfig cfg = tiny_config(9);
    cfg.epochs = 2;

    const TweetClassifier base = TweetClassifier::train(train, {}, enc, cfg, catalog);
    const TweetClassifier again =
        TweetClassifier::retrain_enriched(train, {}, {}, enc, cfg, catalog);
    REQUIRE(base.history().size() == again.history().size());
    for (std::size_t i = 0; i < base.history().size(); ++i)
      CHECK(base.history()[i].train_loss == again.history()[i].train_loss);
    const Tweet probe = make_tweet("p", "dace romp");
    CHECK(base.classify(probe) == again.classify(probe));
  }

  TEST_CASE("scores follow the catalog order, not the class identity") {
    // Training twice with the catalog columns permuted must permute the
    // score components and nothing else (up to float round-off).
    Rng rng(17);
    const LabeledTweetSet train =
        make_set({{"p", &kPoolA}, {"q", &kPoolB}, {"r", &kPoolC}}, 30, rng);
    const CharEncoder enc = CharEncoder::fit(train, 1, 48);
    ClassifierConfig cfg = tiny_config(13);
    cfg.epochs = 2;
    cfg.dropout = 0.0;  // dropout draws are position-dependent, not class-dependent, but keep this strict

    const PartyCatalog cat_a({{"p", "L", "up"}, {"q", "C", "uq"}, {"r", "R", "ur"}});
    const PartyCatalog cat_b({{"r", "R", "ur"}, {"p", "L", "up"}, {"q", "C", "uq"}});
    const TweetClassifier clf_a = TweetClassifier::train(train, {}, enc, cfg, cat_a);
    const TweetClassifier clf_b = TweetClassifier::train(train, {}, enc, cfg, cat_b);

    Rng probe_rng(99);
    for (int i = 0; i < 6; ++i) {
      const auto* pool = i % 3 == 0 ? &kPoolA : (i % 3 == 1 ? &kPoolB : &kPoolC);
      const Tweet probe = make_tweet("p" + std::to_string(i), sentence(probe_rng, *pool, 5));
      const Vecd pa = clf_a.classify(probe);
      const Vecd pb = clf_b.classify(probe);
      for (const char* label : {"p", "q", "r"})
        CHECK(pa[cat_a.index_of(label)] ==
              doctest::Approx(pb[cat_b.index_of(label)]).epsilon(5e-4));
    }
  }

  TEST_CASE("rejects degenerate training sets") {
    const PartyCatalog catalog({{"alpha", "L", "pa"}, {"bravo", "R", "pb"}});
    Rng rng(1);
    const LabeledTweetSet single = make_set({{"alpha", &kPoolA}}, 10, rng);
    const CharEncoder enc = CharEncoder::fit(single, 1, 48);
    CHECK_THROWS_AS(TweetClassifier::train({}, {}, enc, tiny_config(1), catalog), ValidationError);
    CHECK_THROWS_AS(TweetClassifier::train(single, {}, enc, tiny_config(1), catalog),
                    ValidationError);

    LabeledTweetSet stray = make_set({{"alpha", &kPoolA}, {"bravo", &kPoolB}}, 5, rng);
    stray.items.push_back({make_tweet("x", "abc"), "charlie", Provenance::pivot});
    CHECK_THROWS_AS(TweetClassifier::train(stray, {}, enc, tiny_config(1), catalog),
                    ValidationError);
  }
}

TEST_SUITE("classifier artifacts") {
  TEST_CASE("save and load reproduce scores exactly") {
    const PartyCatalog catalog({{"alpha", "L", "pa"}, {"bravo", "R", "pb"}});
    Rng rng(29);
    const LabeledTweetSet train = make_set({{"alpha", &kPoolA}, {"bravo", &kPoolB}}, 40, rng);
    const CharEncoder enc = CharEncoder::fit(train, 1, 48);
    ClassifierConfig cfg = tiny_config(31);
    cfg.epochs = 2;
    const TweetClassifier clf = TweetClassifier::train(train, {}, enc, cfg, catalog);

    TempDir dir("classifier");
    clf.save(dir.path() / "model");
    const TweetClassifier back = TweetClassifier::load(dir.path() / "model");
    CHECK(back.class_labels() == clf.class_labels());
    CHECK(back.encoder().chars() == clf.encoder().chars());

    Rng probe_rng(4);
    for (int i = 0; i < 8; ++i) {
      const auto* pool = i % 2 == 0 ? &kPoolA : &kPoolB;
      const Tweet probe = make_tweet("p" + std::to_string(i), sentence(probe_rng, *pool, 7));
      CHECK(clf.classify(probe) == back.classify(probe));
    }

    SUBCASE("corrupted weights are rejected") {
      std::ofstream out(dir.path() / "model" / "weights.bin", std::ios::binary | std::ios::trunc);
      out << "JUNKJUNK";
      out.close();
      CHECK_THROWS_AS(TweetClassifier::load(dir.path() / "model"), ParseError);
    }
  }

  TEST_CASE("loading from a missing directory fails cleanly") {
    TempDir dir("classifier");
    CHECK_THROWS(TweetClassifier::load(dir.path() / "nope"));
  }

  TEST_CASE("training log has a metadata line and one row per epoch") {
    const PartyCatalog catalog({{"alpha", "L", "pa"}, {"bravo", "R", "pb"}});
    Rng rng(41);
    const LabeledTweetSet train = make_set({{"alpha", &kPoolA}, {"bravo", &kPoolB}}, 36, rng);
    const LabeledTweetSet val = make_set({{"alpha", &kPoolA}, {"bravo", &kPoolB}}, 12, rng);
    const CharEncoder enc = CharEncoder::fit(train, 1, 48);
    ClassifierConfig cfg = tiny_config(43);
    cfg.epochs = 2;
    cfg.early_stop_patience = 5;
    const TweetClassifier clf = TweetClassifier::train(train, val, enc, cfg, catalog);

    TempDir dir("classifier");
    clf.save_training_log(dir.path() / "log.csv", 0xabcdef, 43);
    const std::string text = slurp(dir.path() / "log.csv");
    CHECK(text.rfind("# config_hash=", 0) == 0);
    CHECK(text.find("epoch,train_loss,val_accuracy") != std::string::npos);
    std::size_t rows = 0;
    for (char c : text)
      if (c == '\n') ++rows;
    CHECK(rows == 2 + clf.history().size());
  }
}
