#include "ideolens/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "ideolens/errors.hpp"
#include "ideolens/io.hpp"
#include "ideolens/text.hpp"

namespace ideolens {

using nlohmann::json;

namespace {

double safe_div(double num, double den) { return den > 0 ? num / den : 0.0; }

double f1_of(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

const std::string& predicted_label(const Prediction& pred, Task task) {
  return task == Task::party ? pred.party : pred.pole;
}

}  // namespace

EvalReport evaluate(const std::vector<Prediction>& preds,
                    const std::map<std::string, std::string>& truth, Task task,
                    const PartyCatalog& catalog) {
  EvalReport rep;
  rep.task = task;
  const std::vector<std::string> universe =
      task == Task::party ? catalog.labels() : catalog.poles();
  const std::set<std::string> known(universe.begin(), universe.end());

  std::set<std::string> seen_users;
  std::set<std::string> seen_labels;
  for (const auto& pred : preds) {
    if (!seen_users.insert(pred.user_id).second)
      throw ValidationError("duplicate prediction for user '" + pred.user_id + "'");
    auto it = truth.find(pred.user_id);
    if (it == truth.end())
      throw ValidationError("no truth label for predicted user '" + pred.user_id + "'");
    if (!known.count(it->second))
      throw ValidationError("truth label outside the catalog: '" + it->second + "'");
    const std::string& hat = predicted_label(pred, task);
    if (!hat.empty() && !known.count(hat))
      throw ValidationError("predicted label outside the catalog: '" + hat + "'");
    seen_labels.insert(it->second);
    if (!hat.empty()) seen_labels.insert(hat);
  }

  for (const std::string& label : universe)
    if (seen_labels.count(label)) rep.classes.push_back(label);
  const int k = static_cast<int>(rep.classes.size());
  auto class_index = [&](const std::string& label) {
    return static_cast<int>(std::find(rep.classes.begin(), rep.classes.end(), label) -
                            rep.classes.begin());
  };

  rep.confusion = Eigen::MatrixXi::Zero(k, k + 1);
  rep.n_users = static_cast<std::int64_t>(preds.size());
  std::vector<std::int64_t> tp(static_cast<std::size_t>(k), 0), fp(static_cast<std::size_t>(k), 0),
      fn(static_cast<std::size_t>(k), 0);
  for (const auto& pred : preds) {
    const int t = class_index(truth.at(pred.user_id));
    const std::string& hat = predicted_label(pred, task);
    if (hat.empty()) {
      ++rep.n_abstained;
      ++fn[static_cast<std::size_t>(t)];
      rep.confusion(t, k) += 1;
      continue;
    }
    const int p = class_index(hat);
    rep.confusion(t, p) += 1;
    if (p == t) {
      ++tp[static_cast<std::size_t>(t)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(t)];
    }
  }

  double macro_p = 0, macro_r = 0, macro_f1 = 0;
  std::int64_t tp_tot = 0, fp_tot = 0, fn_tot = 0;
  for (int c = 0; c < k; ++c) {
    const std::size_t sc = static_cast<std::size_t>(c);
    ClassMetrics m;
    m.support = tp[sc] + fn[sc];
    m.precision_defined = tp[sc] + fp[sc] > 0;
    m.precision = safe_div(static_cast<double>(tp[sc]), static_cast<double>(tp[sc] + fp[sc]));
    m.recall = safe_div(static_cast<double>(tp[sc]), static_cast<double>(tp[sc] + fn[sc]));
    m.f1 = f1_of(m.precision, m.recall);
    macro_p += m.precision;
    macro_r += m.recall;
    macro_f1 += m.f1;
    tp_tot += tp[sc];
    fp_tot += fp[sc];
    fn_tot += fn[sc];
    rep.per_class[rep.classes[sc]] = m;
  }
  if (k > 0) {
    rep.macro_precision = macro_p / k;
    rep.macro_recall = macro_r / k;
    rep.macro_f1 = macro_f1 / k;
  }
  rep.micro_precision = safe_div(static_cast<double>(tp_tot), static_cast<double>(tp_tot + fp_tot));
  rep.micro_recall = safe_div(static_cast<double>(tp_tot), static_cast<double>(tp_tot + fn_tot));
  rep.micro_f1 = f1_of(rep.micro_precision, rep.micro_recall);
  return rep;
}

json EvalReport::to_json() const {
  json per;
  for (const auto& [label, m] : per_class) {
    per[label] = {{"precision", m.precision},
                  {"recall", m.recall},
                  {"f1", m.f1},
                  {"support", m.support},
                  {"precision_defined", m.precision_defined}};
  }
  json conf = json::array();
  for (int r = 0; r < confusion.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < confusion.cols(); ++c) row.push_back(confusion(r, c));
    conf.push_back(row);
  }
  return json{{"task", task_name(task)},
              {"classes", classes},
              {"per_class", per},
              {"macro", {{"precision", macro_precision}, {"recall", macro_recall}, {"f1", macro_f1}}},
              {"micro", {{"precision", micro_precision}, {"recall", micro_recall}, {"f1", micro_f1}}},
              {"confusion", conf},
              {"n_users", n_users},
              {"n_abstained", n_abstained}};
}

Eigen::MatrixXi confusion_with_marginals(const EvalReport& report) {
  const Eigen::MatrixXi& c = report.confusion;
  Eigen::MatrixXi out = Eigen::MatrixXi::Zero(c.rows() + 1, c.cols() + 1);
  out.topLeftCorner(c.rows(), c.cols()) = c;
  for (int r = 0; r < c.rows(); ++r) out(r, c.cols()) = c.row(r).sum();
  for (int j = 0; j < c.cols(); ++j) out(c.rows(), j) = c.col(j).sum();
  out(c.rows(), c.cols()) = c.sum();
  return out;
}

namespace {

CurvePoint curve_point(const std::vector<Prediction>& subset,
                       const std::map<std::string, std::string>& truth_party,
                       const std::map<std::string, std::string>& truth_pole,
                       const PartyCatalog& catalog) {
  CurvePoint pt;
  pt.n_users = static_cast<std::int64_t>(subset.size());
  if (subset.empty()) return pt;
  const bool has_party = std::any_of(subset.begin(), subset.end(),
                                     [](const Prediction& p) { return !p.party.empty(); });
  if (has_party && !truth_party.empty())
    pt.micro_f1_party = evaluate(subset, truth_party, Task::party, catalog).micro_f1;
  pt.micro_f1_pole = evaluate(subset, truth_pole, Task::pole, catalog).micro_f1;
  return pt;
}

}  // namespace

std::vector<CurvePoint> distance_sensitivity(const std::vector<Prediction>& preds,
                                             const std::map<std::string, std::string>& truth_party,
                                             const std::map<std::string, std::string>& truth_pole,
                                             const PartyCatalog& catalog, int n_points) {
  if (n_points < 1) throw ConfigError("distance curve needs at least one point");
  std::vector<CurvePoint> out;
  for (int i = 1; i <= n_points; ++i) {
    const double th = static_cast<double>(i) / n_points;
    std::vector<Prediction> subset;
    for (const auto& p : preds)
      if (p.normalized_distance <= th) subset.push_back(p);
    CurvePoint pt = curve_point(subset, truth_party, truth_pole, catalog);
    pt.threshold = th;
    out.push_back(pt);
  }
  return out;
}

std::vector<CurvePoint> count_sensitivity(const std::vector<Prediction>& preds,
                                          const std::map<std::string, std::string>& truth_party,
                                          const std::map<std::string, std::string>& truth_pole,
                                          const PartyCatalog& catalog,
                                          const std::map<std::string, std::int64_t>& counts,
                                          const std::vector<std::int64_t>& grid) {
  std::vector<CurvePoint> out;
  for (std::int64_t lo : grid) {
    std::vector<Prediction> subset;
    for (const auto& p : preds) {
      auto it = counts.find(p.user_id);
      const std::int64_t c = it == counts.end() ? 0 : it->second;
      if (c >= lo) subset.push_back(p);
    }
    CurvePoint pt = curve_point(subset, truth_party, truth_pole, catalog);
    pt.threshold = static_cast<double>(lo);
    out.push_back(pt);
  }
  return out;
}

void save_report_json(const EvalReport& report, const std::filesystem::path& path,
                      std::uint64_t hash, std::uint64_t seed) {
  write_json_artifact(path, report.to_json(), hash, seed);
}

void save_confusion_csv(const EvalReport& report, const std::filesystem::path& path,
                        std::uint64_t hash, std::uint64_t seed) {
  const Eigen::MatrixXi m = confusion_with_marginals(report);
  std::string out = csv_meta_line(hash, seed);
  out += "truth";
  for (const std::string& c : report.classes) out += ',' + csv_escape("pred_" + c);
  out += ",abstained,total\n";
  for (int r = 0; r < m.rows(); ++r) {
    out += r < static_cast<int>(report.classes.size())
               ? csv_escape(report.classes[static_cast<std::size_t>(r)])
               : std::string("total");
    for (int c = 0; c < m.cols(); ++c) out += ',' + std::to_string(m(r, c));
    out += '\n';
  }
  atomic_write(path, out);
}

void save_curve_csv(const std::vector<CurvePoint>& curve, const std::string& threshold_name,
                    const std::filesystem::path& path, std::uint64_t hash, std::uint64_t seed) {
  std::string out = csv_meta_line(hash, seed);
  out += threshold_name + ",n_users,micro_f1_party,micro_f1_pole\n";
  for (const CurvePoint& pt : curve) {
    out += format_double(pt.threshold);
    out += ',' + std::to_string(pt.n_users);
    out += ',' + format_double(pt.micro_f1_party);
    out += ',' + format_double(pt.micro_f1_pole);
    out += '\n';
  }
  atomic_write(path, out);
}

namespace {

double entropy(const std::map<int, int>& counts, int n) {
  double h = 0;
  for (const auto& [label, c] : counts) {
    const double p = static_cast<double>(c) / n;
    if (p > 0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace

double normalized_mutual_information(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw ConfigError("label vectors differ in length");
  const int n = static_cast<int>(a.size());
  if (n == 0) return 0.0;
  std::map<int, int> ca, cb;
  std::map<std::pair<int, int>, int> cab;
  for (int i = 0; i < n; ++i) {
    ca[a[static_cast<std::size_t>(i)]]++;
    cb[b[static_cast<std::size_t>(i)]]++;
    cab[{a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(i)]}]++;
  }
  double mi = 0;
  for (const auto& [ab, c] : cab) {
    const double pab = static_cast<double>(c) / n;
    const double pa = static_cast<double>(ca[ab.first]) / n;
    const double pb = static_cast<double>(cb[ab.second]) / n;
    mi += pab * std::log(pab / (pa * pb));
  }
  const double ha = entropy(ca, n), hb = entropy(cb, n);
  const double denom = 0.5 * (ha + hb);
  if (denom <= 0) return ha == hb ? 1.0 : 0.0;  // both constant
  return mi / denom;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw ConfigError("label vectors differ in length");
  const std::int64_t n = static_cast<std::int64_t>(a.size());
  if (n < 2) return 1.0;
  std::map<int, std::int64_t> ca, cb;
  std::map<std::pair<int, int>, std::int64_t> cab;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]]++;
    cb[b[i]]++;
    cab[{a[i], b[i]}]++;
  }
  auto choose2 = [](std::int64_t x) { return x * (x - 1) / 2.0; };
  double sum_ab = 0, sum_a = 0, sum_b = 0;
  for (const auto& [key, c] : cab) sum_ab += choose2(c);
  for (const auto& [key, c] : ca) sum_a += choose2(c);
  for (const auto& [key, c] : cb) sum_b += choose2(c);
  const double total = choose2(n);
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_ab - expected) / (max_index - expected);
}

}  // namespace ideolens
