#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "ideolens/errors.hpp"
#include "ideolens/evaluate.hpp"
#include "ideolens/rng.hpp"
#include "test_util.hpp"

using namespace ideolens;

namespace {

const PartyCatalog& two_party() {
  static const PartyCatalog cat({{"A", "L", "piv_a"}, {"B", "R", "piv_b"}});
  return cat;
}

const PartyCatalog& six_party() {
  static const PartyCatalog cat({{"p1", "g1", "x1"},
                                 {"p2", "g1", "x2"},
                                 {"p3", "g2", "x3"},
                                 {"p4", "g2", "x4"},
                                 {"p5", "g3", "x5"},
                                 {"p6", "g3", "x6"}});
  return cat;
}

Prediction make_pred(const std::string& user, const std::string& party,
                     const PartyCatalog& cat, double dist = 0.0) {
  Prediction p;
  p.user_id = user;
  p.party = party;
  p.pole = party.empty() ? "" : cat.pole_of(party);
  p.normalized_distance = dist;
  p.confidence = 1.0 - dist;
  return p;
}

// Independent reference: per-class tallies recomputed with plain loops,
// scanning the full prediction list once per class.
struct RefMetrics {
  double micro_p, micro_r, micro_f1, macro_p, macro_r, macro_f1;
};

RefMetrics reference_metrics(const std::vector<Prediction>& preds,
                             const std::map<std::string, std::string>& truth,
                             const std::vector<std::string>& classes) {
  auto f1 = [](double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; };
  double sum_p = 0, sum_r = 0, sum_f = 0;
  long tp_all = 0, fp_all = 0, fn_all = 0;
  for (const std::string& c : classes) {
    long tp = 0, fp = 0, fn = 0;
    for (const Prediction& pred : preds) {
      const std::string& t = truth.at(pred.user_id);
      if (pred.party == c && t == c) ++tp;
      if (pred.party == c && t != c) ++fp;
      if (pred.party != c && t == c) ++fn;  // covers abstentions too
    }
    const double p = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    sum_p += p;
    sum_r += r;
    sum_f += f1(p, r);
    tp_all += tp;
    fp_all += fp;
    fn_all += fn;
  }
  RefMetrics m;
  m.macro_p = sum_p / static_cast<double>(classes.size());
  m.macro_r = sum_r / static_cast<double>(classes.size());
  m.macro_f1 = sum_f / static_cast<double>(classes.size());
  m.micro_p = tp_all + fp_all > 0 ? static_cast<double>(tp_all) / (tp_all + fp_all) : 0.0;
  m.micro_r = tp_all + fn_all > 0 ? static_cast<double>(tp_all) / (tp_all + fn_all) : 0.0;
  m.micro_f1 = f1(m.micro_p, m.micro_r);
  return m;
}

}  // namespace

TEST_CASE("worked example: [A,A,B] against [A,B,B]") {
  const auto& cat = two_party();
  const std::vector<Prediction> preds = {make_pred("u1", "A", cat), make_pred("u2", "A", cat),
                                         make_pred("u3", "B", cat)};
  const std::map<std::string, std::string> truth = {{"u1", "A"}, {"u2", "B"}, {"u3", "B"}};
  const EvalReport rep = evaluate(preds, truth, Task::party, cat);
  CHECK(rep.micro_precision == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(rep.micro_recall == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(rep.micro_f1 == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(rep.macro_precision == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(rep.macro_recall == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(rep.macro_f1 == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(rep.per_class.at("A").precision == doctest::Approx(0.5));
  CHECK(rep.per_class.at("A").recall == doctest::Approx(1.0));
  CHECK(rep.per_class.at("B").precision == doctest::Approx(1.0));
  CHECK(rep.per_class.at("B").recall == doctest::Approx(0.5));
  CHECK(rep.confusion(0, 0) == 1);  // truth A predicted A
  CHECK(rep.confusion(1, 0) == 1);  // truth B predicted A
  CHECK(rep.confusion(1, 1) == 1);  // truth B predicted B
  CHECK(rep.n_abstained == 0);
}

TEST_CASE("abstentions are false negatives without false positives") {
  const auto& cat = two_party();
  const std::vector<Prediction> preds = {make_pred("u1", "A", cat), make_pred("u2", "", cat)};
  const std::map<std::string, std::string> truth = {{"u1", "A"}, {"u2", "B"}};
  const EvalReport rep = evaluate(preds, truth, Task::party, cat);
  CHECK(rep.n_abstained == 1);
  CHECK(rep.micro_precision == doctest::Approx(1.0));
  CHECK(rep.micro_recall == doctest::Approx(0.5));
  CHECK(rep.micro_f1 == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(rep.per_class.at("B").recall == 0.0);
  CHECK_FALSE(rep.per_class.at("B").precision_defined);
  // Abstained column in the confusion matrix.
  CHECK(rep.confusion(1, 2) == 1);
}

TEST_CASE("perfect predictions score one everywhere") {
  const auto& cat = two_party();
  std::vector<Prediction> preds;
  std::map<std::string, std::string> truth;
  for (int i = 0; i < 10; ++i) {
    const std::string u = "u" + std::to_string(i);
    const std::string label = i % 2 ? "A" : "B";
    preds.push_back(make_pred(u, label, cat));
    truth[u] = label;
  }
  const EvalReport rep = evaluate(preds, truth, Task::party, cat);
  CHECK(rep.micro_f1 == 1.0);
  CHECK(rep.macro_f1 == 1.0);
  CHECK(rep.confusion(0, 1) == 0);
  CHECK(rep.confusion(1, 0) == 0);
}

TEST_CASE("all abstained collapses to zero by convention") {
  const auto& cat = two_party();
  const std::vector<Prediction> preds = {make_pred("u1", "", cat), make_pred("u2", "", cat)};
  const std::map<std::string, std::string> truth = {{"u1", "A"}, {"u2", "B"}};
  const EvalReport rep = evaluate(preds, truth, Task::party, cat);
  CHECK(rep.micro_precision == 0.0);
  CHECK(rep.micro_recall == 0.0);
  CHECK(rep.micro_f1 == 0.0);
  CHECK(rep.n_abstained == 2);
}

TEST_CASE("evaluate matches a brute-force tally on random instances") {
  const auto& cat = six_party();
  const std::vector<std::string> labels = cat.labels();
  Rng rng(777);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.index(60));
    std::vector<Prediction> preds;
    std::map<std::string, std::string> truth;
    const bool with_abstain = trial % 2 == 0;
    for (int i = 0; i < n; ++i) {
      const std::string u = "u" + std::to_string(i);
      std::string hat = labels[rng.index(labels.size())];
      if (with_abstain && rng.uniform() < 0.2) hat.clear();
      preds.push_back(make_pred(u, hat, cat));
      truth[u] = labels[rng.index(labels.size())];
    }
    const EvalReport rep = evaluate(preds, truth, Task::party, cat);
    const RefMetrics ref = reference_metrics(preds, truth, rep.classes);
    CHECK(rep.micro_precision == doctest::Approx(ref.micro_p).epsilon(1e-12));
    CHECK(rep.micro_recall == doctest::Approx(ref.micro_r).epsilon(1e-12));
    CHECK(rep.micro_f1 == doctest::Approx(ref.micro_f1).epsilon(1e-12));
    CHECK(rep.macro_precision == doctest::Approx(ref.macro_p).epsilon(1e-12));
    CHECK(rep.macro_recall == doctest::Approx(ref.macro_r).epsilon(1e-12));
    CHECK(rep.macro_f1 == doctest::Approx(ref.macro_f1).epsilon(1e-12));
    // Confusion marginals must add up to the population.
    CHECK(rep.confusion.sum() == n);
  }
}

TEST_CASE("micro precision equals recall when nothing is abstained") {
  const auto& cat = six_party();
  const std::vector<std::string> labels = cat.labels();
  Rng rng(31);
  std::vector<Prediction> preds;
  std::map<std::string, std::string> truth;
  for (int i = 0; i < 100; ++i) {
    const std::string u = "u" + std::to_string(i);
    preds.push_back(make_pred(u, labels[rng.index(labels.size())], cat));
    truth[u] = labels[rng.index(labels.size())];
  }
  const EvalReport rep = evaluate(preds, truth, Task::party, cat);
  CHECK(rep.micro_precision == doctest::Approx(rep.micro_recall).epsilon(1e-12));
}

TEST_CASE("pole scores equal party scores after block-summing the confusion") {
  const auto& cat = six_party();  // poles g1={p1,p2}, g2={p3,p4}, g3={p5,p6}
  const std::vector<std::string> labels = cat.labels();
  Rng rng(55);
  std::vector<Prediction> preds;
  std::map<std::string, std::string> truth_party, truth_pole;
  for (int i = 0; i < 240; ++i) {
    const std::string u = "u" + std::to_string(i);
    preds.push_back(make_pred(u, labels[rng.index(labels.size())], cat));
    truth_party[u] = labels[rng.index(labels.size())];
    truth_pole[u] = cat.pole_of(truth_party[u]);
  }
  const EvalReport party_rep = evaluate(preds, truth_party, Task::party, cat);
  const EvalReport pole_rep = evaluate(preds, truth_pole, Task::pole, cat);
  REQUIRE(party_rep.classes.size() == 6);
  REQUIRE(pole_rep.classes.size() == 3);
  // Sum 2x2 party blocks into pole cells and compare.
  for (int pr = 0; pr < 3; ++pr)
    for (int pc = 0; pc < 3; ++pc) {
      int sum = 0;
      for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c)
          if (r / 2 == pr && c / 2 == pc) sum += party_rep.confusion(r, c);
      CHECK(pole_rep.confusion(pr, pc) == sum);
    }
}

TEST_CASE("macro is invariant under relabeling") {
  const auto& cat = two_party();
  const PartyCatalog swapped({{"A", "L", "piv_a"}, {"B", "R", "piv_b"}});
  std::vector<Prediction> preds = {make_pred("u1", "A", cat), make_pred("u2", "A", cat),
                                   make_pred("u3", "B", cat), make_pred("u4", "B", cat)};
  std::map<std::string, std::string> truth = {{"u1", "A"}, {"u2", "B"}, {"u3", "B"}, {"u4", "A"}};
  const EvalReport rep = evaluate(preds, truth, Task::party, cat);
  // Swap A <-> B everywhere.
  for (auto& p : preds) p.party = p.party == "A" ? "B" : "A";
  for (auto& [u, t] : truth) t = t == "A" ? "B" : "A";
  const EvalReport rep2 = evaluate(preds, truth, Task::party, swapped);
  CHECK(rep.macro_f1 == doctest::Approx(rep2.macro_f1).epsilon(1e-12));
  CHECK(rep.micro_f1 == doctest::Approx(rep2.micro_f1).epsilon(1e-12));
}

TEST_CASE("evaluate validates its inputs") {
  const auto& cat = two_party();
  SUBCASE("missing truth user") {
    const std::vector<Prediction> preds = {make_pred("ghost", "A", cat)};
    CHECK_THROWS_AS(evaluate(preds, {{"u1", "A"}}, Task::party, cat), ValidationError);
  }
  SUBCASE("label outside the catalog") {
    const std::vector<Prediction> preds = {make_pred("u1", "A", cat)};
    CHECK_THROWS_AS(evaluate(preds, {{"u1", "Z"}}, Task::party, cat), ValidationError);
    std::vector<Prediction> bad = {make_pred("u1", "A", cat)};
    bad[0].party = "Q";
    CHECK_THROWS_AS(evaluate(bad, {{"u1", "A"}}, Task::party, cat), ValidationError);
  }
  SUBCASE("duplicate prediction") {
    const std::vector<Prediction> preds = {make_pred("u1", "A", cat), make_pred("u1", "B", cat)};
    CHECK_THROWS_AS(evaluate(preds, {{"u1", "A"}}, Task::party, cat), ValidationError);
  }
}

TEST_CASE("confusion marginals") {
  const auto& cat = two_party();
  const std::vector<Prediction> preds = {make_pred("u1", "A", cat), make_pred("u2", "A", cat),
                                         make_pred("u3", "", cat)};
  const std::map<std::string, std::string> truth = {{"u1", "A"}, {"u2", "B"}, {"u3", "B"}};
  const EvalReport rep = evaluate(preds, truth, Task::party, cat);
  const Eigen::MatrixXi m = confusion_with_marginals(rep);
  REQUIRE(m.rows() == 3);  // 2 classes + total row
  REQUIRE(m.cols() == 4);  // 2 classes + abstained + total col
  CHECK(m(0, 3) == 1);     // truth A row total
  CHECK(m(1, 3) == 2);     // truth B row total
  CHECK(m(2, 0) == 2);     // predicted A column total
  CHECK(m(2, 2) == 1);     // abstained column total
  CHECK(m(2, 3) == 3);     // grand total
}

TEST_CASE("distance sensitivity sweeps nested subpopulations") {
  const auto& cat = two_party();
  std::vector<Prediction> preds;
  std::map<std::string, std::string> truth_party, truth_pole;
  // Users at distance i/10; the close half is predicted correctly, the far
  // half wrong, so micro F1 decays as the threshold loosens.
  for (int i = 0; i < 10; ++i) {
    const std::string u = "u" + std::to_string(i);
    const std::string t = "A";
    const std::string hat = i < 5 ? "A" : "B";
    Prediction p = make_pred(u, hat, cat, i / 10.0);
    preds.push_back(p);
    truth_party[u] = t;
    truth_pole[u] = cat.pole_of(t);
  }
  const auto curve = distance_sensitivity(preds, truth_party, truth_pole, cat, 20);
  REQUIRE(curve.size() == 20);
  CHECK(curve.back().threshold == doctest::Approx(1.0));
  CHECK(curve.back().n_users == 10);
  for (std::size_t i = 1; i < curve.size(); ++i)
    CHECK(curve[i].n_users >= curve[i - 1].n_users);
  // At threshold 0.45 only the five correct users remain.
  const CurvePoint& tight = curve[8];  // threshold 0.45
  CHECK(tight.threshold == doctest::Approx(0.45));
  CHECK(tight.n_users == 5);
  CHECK(tight.micro_f1_party == doctest::Approx(1.0));
  // All ten users: 5 TP for A, 5 FP for B, 5 FN for A.
  CHECK(curve.back().micro_f1_party == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("count sensitivity filters by activity") {
  const auto& cat = two_party();
  std::vector<Prediction> preds = {make_pred("u1", "A", cat), make_pred("u2", "B", cat),
                                   make_pred("u3", "A", cat)};
  std::map<std::string, std::string> tp = {{"u1", "A"}, {"u2", "A"}, {"u3", "A"}};
  std::map<std::string, std::string> tg;
  for (const auto& [u, t] : tp) tg[u] = cat.pole_of(t);
  const std::map<std::string, std::int64_t> counts = {{"u1", 100}, {"u2", 10}, {"u3", 40}};
  const auto curve = count_sensitivity(preds, tp, tg, cat, counts, {0, 25, 50});
  REQUIRE(curve.size() == 3);
  CHECK(curve[0].n_users == 3);
  CHECK(curve[1].n_users == 2);
  CHECK(curve[2].n_users == 1);
  CHECK(curve[2].micro_f1_party == doctest::Approx(1.0));
}

TEST_CASE("report json and csv artifacts") {
  const auto& cat = two_party();
  const std::vector<Prediction> preds = {make_pred("u1", "A", cat), make_pred("u2", "B", cat)};
  const std::map<std::string, std::string> truth = {{"u1", "A"}, {"u2", "B"}};
  const EvalReport rep = evaluate(preds, truth, Task::party, cat);
  testutil::TempDir d("report");
  save_report_json(rep, d.file("report.json"), 42u, 7u);
  save_confusion_csv(rep, d.file("conf.csv"), 42u, 7u);
  const std::string js = testutil::slurp(d.file("report.json"));
  CHECK(js.find("\"micro\"") != std::string::npos);
  CHECK(js.find("config_hash") != std::string::npos);
  const std::string csv = testutil::slurp(d.file("conf.csv"));
  CHECK(csv.find("# config_hash=") == 0);
  CHECK(csv.find("pred_A") != std::string::npos);
  CHECK(csv.find("abstained") != std::string::npos);
}
