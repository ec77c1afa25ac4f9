#include "ideolens/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ideolens/errors.hpp"
#include "ideolens/io.hpp"
#include "ideolens/rng.hpp"
#include "ideolens/text.hpp"

namespace ideolens {

using nlohmann::json;

PartyCatalog::PartyCatalog(std::vector<Party> parties) : parties_(std::move(parties)) {
  if (parties_.empty()) throw ValidationError("catalog has no parties");
  for (int i = 0; i < size(); ++i) {
    const Party& p = parties_[static_cast<std::size_t>(i)];
    if (p.label.empty() || p.pole.empty() || p.pivot_user_id.empty())
      throw ValidationError("catalog entry " + std::to_string(i) + " has an empty field");
    if (!by_label_.emplace(p.label, i).second)
      throw ValidationError("duplicate party label: " + p.label);
    if (!by_pivot_.emplace(p.pivot_user_id, i).second)
      throw ValidationError("duplicate pivot account: " + p.pivot_user_id);
  }
}

PartyCatalog PartyCatalog::italian_2019() {
  return PartyCatalog({{"PRC", "LEFT", "direzioneprc"},
                       {"+E", "LEFT", "Piu_Europa"},
                       {"PD", "LEFT", "pdnetwork"},
                       {"M5S", "M5S", "Mov5Stelle"},
                       {"FI", "RIGHT", "forza_italia"},
                       {"LE", "RIGHT", "LegaSalvini"},
                       {"FdI", "RIGHT", "FratellidItalia"},
                       {"CPI", "RIGHT", "CasaPoundItalia"}});
}

int PartyCatalog::index_of(const std::string& label) const {
  auto it = by_label_.find(label);
  return it == by_label_.end() ? -1 : it->second;
}

const std::string& PartyCatalog::pole_of(const std::string& label) const {
  const int i = index_of(label);
  if (i < 0) throw ValidationError("unknown party label: " + label);
  return parties_[static_cast<std::size_t>(i)].pole;
}

bool PartyCatalog::is_pivot(const std::string& user_id) const {
  return by_pivot_.count(user_id) > 0;
}

int PartyCatalog::party_of_pivot(const std::string& user_id) const {
  auto it = by_pivot_.find(user_id);
  return it == by_pivot_.end() ? -1 : it->second;
}

std::vector<std::string> PartyCatalog::labels() const {
  std::vector<std::string> out;
  out.reserve(parties_.size());
  for (const Party& p : parties_) out.push_back(p.label);
  return out;
}

std::vector<std::string> PartyCatalog::poles() const {
  std::vector<std::string> out;
  for (const Party& p : parties_)
    if (std::find(out.begin(), out.end(), p.pole) == out.end()) out.push_back(p.pole);
  return out;
}

bool PartyCatalog::has_pole(const std::string& pole) const {
  for (const Party& p : parties_)
    if (p.pole == pole) return true;
  return false;
}

bool SplitAssignment::contains(const std::string& split_name, const std::string& user) const {
  const auto& v = split(split_name);
  return std::binary_search(v.begin(), v.end(), user);
}

const std::vector<std::string>& SplitAssignment::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "validation") return validation;
  if (name == "test") return test;
  throw ConfigError("unknown split name: " + name);
}

PartyCatalog load_catalog(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError("catalog " + path.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("parties") || !j["parties"].is_array())
    throw ParseError("catalog " + path.string() + ": expected object with a 'parties' array");
  std::vector<Party> parties;
  for (const auto& pj : j["parties"]) {
    if (!pj.is_object() || !pj.contains("label") || !pj.contains("pole") || !pj.contains("pivot_user_id"))
      throw ParseError("catalog " + path.string() + ": party entries need label/pole/pivot_user_id");
    parties.push_back({pj["label"].get<std::string>(), pj["pole"].get<std::string>(),
                       pj["pivot_user_id"].get<std::string>()});
  }
  return PartyCatalog(std::move(parties));
}

void save_catalog(const PartyCatalog& catalog, const std::filesystem::path& path) {
  json parties = json::array();
  for (const Party& p : catalog.parties())
    parties.push_back({{"label", p.label}, {"pole", p.pole}, {"pivot_user_id", p.pivot_user_id}});
  json j;
  j["parties"] = parties;
  atomic_write(path, j.dump(2) + "\n");
}

namespace {

std::string get_string(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || !j[key].is_string())
    throw ParseError("tweets line " + std::to_string(line) + ": missing or non-string '" + key + "'");
  return j[key].get<std::string>();
}

void sort_timeline(Timeline& t) {
  std::sort(t.tweets.begin(), t.tweets.end(), [](const Tweet& a, const Tweet& b) {
    if (a.created_at != b.created_at) return a.created_at > b.created_at;
    return a.tweet_id < b.tweet_id;
  });
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& tweets_path,
                   const std::filesystem::path& likes_path,
                   const std::filesystem::path& catalog_path) {
  Corpus corpus;
  corpus.catalog = load_catalog(catalog_path);

  std::ifstream in(tweets_path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + tweets_path.string());
  std::map<std::string, Timeline> by_user;
  std::set<std::string> seen_tweet_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("tweets line " + std::to_string(lineno) + ": " + e.what());
    }
    Tweet t;
    t.tweet_id = get_string(j, "tweet_id", lineno);
    t.user_id = get_string(j, "user_id", lineno);
    t.text = get_string(j, "text", lineno);
    t.created_at = parse_iso8601(get_string(j, "created_at", lineno));
    if (!j.contains("is_retweet") || !j["is_retweet"].is_boolean())
      throw ParseError("tweets line " + std::to_string(lineno) + ": missing or non-boolean 'is_retweet'");
    t.is_retweet = j["is_retweet"].get<bool>();
    if (t.is_retweet) {
      if (!j.contains("retweet_of_user") || !j["retweet_of_user"].is_string())
        throw ParseError("tweets line " + std::to_string(lineno) +
                         ": retweets need a string 'retweet_of_user'");
      t.retweet_of_user = j["retweet_of_user"].get<std::string>();
    } else if (j.contains("retweet_of_user") && !j["retweet_of_user"].is_null()) {
      throw ParseError("tweets line " + std::to_string(lineno) +
                       ": 'retweet_of_user' must be null when is_retweet is false");
    }
    if (!seen_tweet_ids.insert(t.tweet_id).second)
      throw ValidationError("duplicate tweet_id '" + t.tweet_id + "' at tweets line " +
                            std::to_string(lineno));
    if (t.text.empty()) {
      ++corpus.n_skipped_tweets;
      continue;
    }
    Timeline& tl = by_user[t.user_id];
    tl.user_id = t.user_id;
    tl.tweets.push_back(std::move(t));
  }

  for (auto& [user_id, tl] : by_user) {
    sort_timeline(tl);
    const int party = corpus.catalog.party_of_pivot(user_id);
    if (party >= 0) {
      corpus.pivots[corpus.catalog.party(party).label] = std::move(tl);
      continue;
    }
    if (static_cast<int>(tl.tweets.size()) < kMinTimelineTweets) {
      ++corpus.n_dropped_users;
      continue;
    }
    if (static_cast<int>(tl.tweets.size()) > kMaxTimelineTweets)
      tl.tweets.resize(kMaxTimelineTweets);
    corpus.users[user_id] = std::move(tl);
  }

  std::map<std::string, std::string> tweet_party;
  for (const auto& [label, tl] : corpus.pivots)
    for (const Tweet& t : tl.tweets) tweet_party[t.tweet_id] = label;

  std::ifstream lin(likes_path, std::ios::binary);
  if (!lin) throw ConfigError("cannot open file: " + likes_path.string());
  std::set<std::pair<std::string, std::string>> seen_edges;
  std::vector<std::string> offenders;
  lineno = 0;
  while (std::getline(lin, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("likes line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.contains("user_id") || !j["user_id"].is_string() || !j.contains("pivot_tweet_id") ||
        !j["pivot_tweet_id"].is_string())
      throw ParseError("likes line " + std::to_string(lineno) +
                       ": expected string fields user_id and pivot_tweet_id");
    const std::string user = j["user_id"].get<std::string>();
    const std::string tweet = j["pivot_tweet_id"].get<std::string>();
    auto it = tweet_party.find(tweet);
    if (it == tweet_party.end()) {
      if (offenders.size() < 10)
        offenders.push_back("line " + std::to_string(lineno) + ": " + tweet);
      continue;
    }
    if (!seen_edges.emplace(user, tweet).second) continue;  // duplicates collapse
    corpus.likes.edges.emplace_back(user, tweet);
    corpus.likes.tweet_party[tweet] = it->second;
  }
  if (!offenders.empty()) {
    std::string msg = "likes reference tweets that are not pivot tweets:";
    for (const auto& o : offenders) msg += "\n  " + o;
    throw ValidationError(msg);
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& tweets_path,
                 const std::filesystem::path& likes_path,
                 const std::filesystem::path& catalog_path) {
  std::string tweets;
  auto dump_timeline = [&tweets](const Timeline& tl) {
    // Oldest first on disk; load_corpus re-sorts anyway.
    for (auto it = tl.tweets.rbegin(); it != tl.tweets.rend(); ++it) {
      const Tweet& t = *it;
      json j;
      j["tweet_id"] = t.tweet_id;
      j["user_id"] = t.user_id;
      j["text"] = t.text;
      j["created_at"] = format_iso8601(t.created_at);
      j["is_retweet"] = t.is_retweet;
      if (t.is_retweet)
        j["retweet_of_user"] = t.retweet_of_user;
      else
        j["retweet_of_user"] = nullptr;
      tweets += canonical_json(j);
      tweets += '\n';
    }
  };
  for (const auto& [label, tl] : corpus.pivots) dump_timeline(tl);
  for (const auto& [user, tl] : corpus.users) dump_timeline(tl);
  atomic_write(tweets_path, tweets);

  std::string likes;
  auto edges = corpus.likes.edges;
  std::sort(edges.begin(), edges.end());
  for (const auto& [user, tweet] : edges) {
    json j;
    j["user_id"] = user;
    j["pivot_tweet_id"] = tweet;
    likes += canonical_json(j);
    likes += '\n';
  }
  atomic_write(likes_path, likes);
  save_catalog(corpus.catalog, catalog_path);
}

namespace {

// Largest-remainder allocation of n into parts proportional to fractions.
std::vector<int> apportion(int n, const std::vector<double>& fractions) {
  std::vector<int> counts(fractions.size());
  std::vector<std::pair<double, std::size_t>> rema;
  int assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double exact = n * fractions[i];
    counts[i] = static_cast<int>(exact);
    assigned += counts[i];
    rema.push_back({exact - counts[i], i});
  }
  std::stable_sort(rema.begin(), rema.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int k = 0; k < n - assigned; ++k) counts[rema[static_cast<std::size_t>(k) % rema.size()].second]++;
  return counts;
}

}  // namespace

SplitAssignment stratified_split(const std::vector<std::string>& users,
                                 const std::map<std::string, std::string>& labels,
                                 const std::array<double, 3>& fractions, std::uint64_t seed) {
  double total = 0;
  int positive = 0;
  for (double f : fractions) {
    if (f < 0) throw ConfigError("split fractions must be non-negative");
    total += f;
    if (f > 0) ++positive;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");

  std::map<std::string, std::vector<std::string>> groups;
  for (const std::string& u : users) {
    auto it = labels.find(u);
    if (it == labels.end()) throw ValidationError("no label for user '" + u + "'");
    groups[it->second].push_back(u);
  }

  Rng rng(derive_seed(seed, "stratified_split"));
  SplitAssignment out;
  out.mode = "stratified-random";
  const std::vector<double> fr(fractions.begin(), fractions.end());
  for (auto& [label, members] : groups) {
    std::sort(members.begin(), members.end());
    rng.shuffle(members);
    if (static_cast<int>(members.size()) < positive) {
      std::cerr << "warning: label '" << label << "' has only " << members.size()
                << " member(s); all assigned to train\n";
      out.train.insert(out.train.end(), members.begin(), members.end());
      continue;
    }
    const std::vector<int> counts = apportion(static_cast<int>(members.size()), fr);
    std::size_t pos = 0;
    for (int k = 0; k < counts[0]; ++k) out.train.push_back(members[pos++]);
    for (int k = 0; k < counts[1]; ++k) out.validation.push_back(members[pos++]);
    for (int k = 0; k < counts[2]; ++k) out.test.push_back(members[pos++]);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

SplitAssignment timewise_split(const Corpus& corpus, std::int64_t threshold,
                               const std::map<std::string, std::string>& labels,
                               double train_fraction, double validation_fraction,
                               std::uint64_t seed) {
  if (train_fraction <= 0 || validation_fraction < 0)
    throw ConfigError("time-wise split needs a positive train fraction");
  std::vector<std::string> test, rest;
  for (const auto& [user, tl] : corpus.users) {
    std::int64_t oldest = tl.tweets.back().created_at;  // most-recent-first order
    if (oldest > threshold)
      test.push_back(user);
    else
      rest.push_back(user);
  }
  if (test.empty())
    throw ValidationError(
        "no user has every tweet after the threshold; lower the threshold date");

  const double denom = train_fraction + validation_fraction;
  SplitAssignment inner = stratified_split(
      rest, labels, {train_fraction / denom, validation_fraction / denom, 0.0}, seed);
  SplitAssignment out;
  out.mode = "time-wise";
  out.train = std::move(inner.train);
  out.validation = std::move(inner.validation);
  std::sort(test.begin(), test.end());
  out.test = std::move(test);
  return out;
}

SplitAssignment load_split(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError("split " + path.string() + ": " + e.what());
  }
  SplitAssignment out;
  try {
    out.train = j.at("train").get<std::vector<std::string>>();
    out.validation = j.at("validation").get<std::vector<std::string>>();
    out.test = j.at("test").get<std::vector<std::string>>();
    out.mode = j.at("mode").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError("split " + path.string() + ": " + e.what());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

void save_split(const SplitAssignment& split, const std::filesystem::path& path,
                std::uint64_t hash, std::uint64_t seed) {
  json j;
  j["train"] = split.train;
  j["validation"] = split.validation;
  j["test"] = split.test;
  j["mode"] = split.mode;
  write_json_artifact(path, std::move(j), hash, seed);
}

std::map<std::string, std::string> load_truth_csv(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  bool header_seen = false;
  std::size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = csv_split(line);
    if (!header_seen) {
      header_seen = true;
      if (!fields.empty() && fields[0] == "user_id") continue;  // header row
    }
    if (fields.size() < 2)
      throw ParseError("truth csv " + path.string() + " line " + std::to_string(lineno) +
                       ": expected user_id,party[,pole]");
    out[fields[0]] = fields[1];
  }
  return out;
}

void save_truth_csv(const std::map<std::string, std::string>& party_of_user,
                    const PartyCatalog& catalog, const std::filesystem::path& path,
                    std::uint64_t hash, std::uint64_t seed) {
  std::string out = csv_meta_line(hash, seed);
  out += "user_id,party,pole\n";
  for (const auto& [user, party] : party_of_user) {
    out += csv_escape(user);
    out += ',';
    out += csv_escape(party);
    out += ',';
    out += csv_escape(catalog.pole_of(party));
    out += '\n';
  }
  atomic_write(path, out);
}

}  // namespace ideolens
