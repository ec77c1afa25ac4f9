#include "ideolens/vectors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "ideolens/errors.hpp"
#include "ideolens/io.hpp"
#include "ideolens/text.hpp"

namespace ideolens {

Matd score_timeline(const TweetScorer& scorer, const Timeline& timeline) {
  std::vector<const Tweet*> ptrs;
  ptrs.reserve(timeline.tweets.size());
  for (const Tweet& t : timeline.tweets) ptrs.push_back(&t);
  return scorer.score(ptrs);
}

Vecd user_vector_from_scores(const Matd& scores, int k) {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (scores.rows() < k)
    throw ValidationError("timeline has " + std::to_string(scores.rows()) +
                          " scored tweets, fewer than k=" + std::to_string(k));
  const Eigen::Index n_parties = scores.cols();
  Vecd v(n_parties * k);
  std::vector<double> column(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index c = 0; c < n_parties; ++c) {
    for (Eigen::Index r = 0; r < scores.rows(); ++r)
      column[static_cast<std::size_t>(r)] = scores(r, c);
    std::partial_sort(column.begin(), column.begin() + k, column.end(), std::greater<>());
    for (int j = 0; j < k; ++j) v(c * k + j) = column[static_cast<std::size_t>(j)];
  }
  return v;
}

Vecd user_vector(const TweetScorer& scorer, const Timeline& timeline, int k) {
  return user_vector_from_scores(score_timeline(scorer, timeline), k);
}

UserVectors vectorize_users(const TweetScorer& scorer,
                            const std::map<std::string, Timeline>& users, int k) {
  UserVectors out;
  out.vectors.resize(static_cast<Eigen::Index>(users.size()),
                     static_cast<Eigen::Index>(scorer.n_classes()) * k);
  Eigen::Index row = 0;
  for (const auto& [user_id, timeline] : users) {
    out.user_ids.push_back(user_id);
    out.vectors.row(row++) = user_vector(scorer, timeline, k).transpose();
  }
  return out;
}

Matd pivot_vectors(const TweetScorer& scorer, const std::map<std::string, Timeline>& pivots,
                   const PartyCatalog& catalog, int k) {
  Matd out(catalog.size(), static_cast<Eigen::Index>(scorer.n_classes()) * k);
  for (int p = 0; p < catalog.size(); ++p) {
    const std::string& label = catalog.party(p).label;
    auto it = pivots.find(label);
    if (it == pivots.end())
      throw ValidationError("no pivot timeline for party '" + label + "'");
    out.row(p) = user_vector(scorer, it->second, k).transpose();
  }
  return out;
}

double cosine_similarity(const Vecd& a, const Vecd& b) {
  if (a.size() != b.size())
    throw ValidationError("cosine similarity of vectors with different lengths");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

double percentile_value(std::vector<double> values, double percentile) {
  if (!(percentile > 0.0 && percentile < 100.0))
    throw ConfigError("percentile must lie strictly between 0 and 100");
  if (values.empty()) throw ValidationError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double rank = percentile / 100.0 * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(rank);
  const double frac = rank - static_cast<double>(lo);
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

EnrichmentSelection select_enrichment_users(const UserVectors& users, const Matd& pivots,
                                            const PartyCatalog& catalog, double percentile) {
  if (pivots.rows() != catalog.size())
    throw ValidationError("pivot vector rows do not match the catalog");
  if (static_cast<Eigen::Index>(users.user_ids.size()) != users.vectors.rows())
    throw ValidationError("user id list does not match the vector rows");

  const Eigen::Index n = users.vectors.rows();
  const int n_parties = catalog.size();
  Matd sims(n, n_parties);
  for (Eigen::Index u = 0; u < n; ++u)
    for (int p = 0; p < n_parties; ++p)
      sims(u, p) = cosine_similarity(users.vectors.row(u).transpose(),
                                     pivots.row(p).transpose());

  EnrichmentSelection out;
  std::vector<double> cutoffs(static_cast<std::size_t>(n_parties));
  for (int p = 0; p < n_parties; ++p) {
    std::vector<double> column(sims.col(p).data(), sims.col(p).data() + n);
    cutoffs[static_cast<std::size_t>(p)] = percentile_value(std::move(column), percentile);
    out.cutoffs[catalog.party(p).label] = cutoffs[static_cast<std::size_t>(p)];
    out.per_party_counts[catalog.party(p).label] = 0;
  }

  for (Eigen::Index u = 0; u < n; ++u) {
    int best = -1;
    double best_sim = 0.0;
    for (int p = 0; p < n_parties; ++p) {
      if (sims(u, p) <= cutoffs[static_cast<std::size_t>(p)]) continue;
      if (best < 0 || sims(u, p) > best_sim) {
        best = p;
        best_sim = sims(u, p);
      }
    }
    if (best < 0) continue;
    const std::string& label = catalog.party(best).label;
    const std::string& user_id = users.user_ids[static_cast<std::size_t>(u)];
    out.user_party[user_id] = label;
    out.user_similarity[user_id] = best_sim;
    out.per_party_counts[label]++;
  }
  return out;
}

LabeledTweetSet select_enrichment_tweets(const TweetScorer& scorer,
                                         const EnrichmentSelection& selection,
                                         const std::map<std::string, Timeline>& users,
                                         double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw ConfigError("threshold must lie in (0, 1]");
  LabeledTweetSet out;
  for (const auto& [user_id, party] : selection.user_party) {
    auto it = users.find(user_id);
    if (it == users.end())
      throw ValidationError("selected user '" + user_id + "' has no timeline");
    const Matd scores = score_timeline(scorer, it->second);
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      if (scores.row(r).maxCoeff() < threshold) continue;
      out.items.push_back({it->second.tweets[static_cast<std::size_t>(r)], party,
                           Provenance::enrichment});
    }
  }
  return out;
}

namespace {

std::string vector_csv(const std::vector<std::string>& keys, const Matd& rows,
                       std::uint64_t hash, std::uint64_t seed, const std::string& key_name) {
  std::string out = csv_meta_line(hash, seed);
  out += key_name;
  for (Eigen::Index c = 0; c < rows.cols(); ++c) out += ",v" + std::to_string(c);
  out += '\n';
  for (std::size_t i = 0; i < keys.size(); ++i) {
    out += csv_escape(keys[i]);
    for (Eigen::Index c = 0; c < rows.cols(); ++c)
      out += ',' + format_double(rows(static_cast<Eigen::Index>(i), c));
    out += '\n';
  }
  return out;
}

// Returns (keys, matrix) from a vector CSV, skipping the meta comment.
std::pair<std::vector<std::string>, Matd> parse_vector_csv(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  std::vector<std::string> keys;
  std::vector<std::vector<double>> rows;
  Eigen::Index width = -1;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty() || line[0] == '#') continue;
    const auto fields = csv_split(line);
    if (width < 0) {  // header row
      width = static_cast<Eigen::Index>(fields.size()) - 1;
      if (width < 1) throw ParseError(path.string() + ": header has no vector columns");
      continue;
    }
    if (static_cast<Eigen::Index>(fields.size()) != width + 1)
      throw ParseError(path.string() + " line " + std::to_string(i + 1) +
                       ": expected " + std::to_string(width + 1) + " fields");
    keys.push_back(fields[0]);
    std::vector<double> row(static_cast<std::size_t>(width));
    for (Eigen::Index c = 0; c < width; ++c)
      row[static_cast<std::size_t>(c)] = std::stod(fields[static_cast<std::size_t>(c) + 1]);
    rows.push_back(std::move(row));
  }
  Matd m(static_cast<Eigen::Index>(rows.size()), width < 0 ? 0 : width);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
  return {std::move(keys), std::move(m)};
}

}  // namespace

void save_user_vectors_csv(const UserVectors& vectors, const std::filesystem::path& path,
                           std::uint64_t config_hash, std::uint64_t seed) {
  atomic_write(path, vector_csv(vectors.user_ids, vectors.vectors, config_hash, seed, "user_id"));
}

UserVectors load_user_vectors_csv(const std::filesystem::path& path) {
  auto [keys, m] = parse_vector_csv(path);
  UserVectors out;
  out.user_ids = std::move(keys);
  out.vectors = std::move(m);
  return out;
}

void save_pivot_vectors_csv(const Matd& pivots, const PartyCatalog& catalog,
                            const std::filesystem::path& path, std::uint64_t config_hash,
                            std::uint64_t seed) {
  if (pivots.rows() != catalog.size())
    throw ValidationError("pivot rows do not match the catalog");
  atomic_write(path, vector_csv(catalog.labels(), pivots, config_hash, seed, "party"));
}

Matd load_pivot_vectors_csv(const std::filesystem::path& path, const PartyCatalog& catalog) {
  auto [keys, m] = parse_vector_csv(path);
  if (static_cast<int>(keys.size()) != catalog.size())
    throw ValidationError(path.string() + ": pivot rows do not match the catalog");
  for (int p = 0; p < catalog.size(); ++p)
    if (keys[static_cast<std::size_t>(p)] != catalog.party(p).label)
      throw ValidationError(path.string() + ": pivot order does not match the catalog");
  return m;
}

}  // namespace ideolens
