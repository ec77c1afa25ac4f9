#include "ideolens/synth.hpp"

#include <algorithm>

#include "ideolens/errors.hpp"
#include "ideolens/rng.hpp"
#include "ideolens/text.hpp"

namespace ideolens {

void GenConfig::validate() const {
  if (n_parties < 2) throw ConfigError("n_parties must be at least 2");
  if (n_poles < 1 || n_poles > n_parties) throw ConfigError("n_poles must be in [1, n_parties]");
  if (n_users < 1) throw ConfigError("n_users must be positive");
  if (tweets_per_user_min < kMinTimelineTweets || tweets_per_user_max > kMaxTimelineTweets ||
      tweets_per_user_min > tweets_per_user_max)
    throw ConfigError("tweets_per_user range must fit inside [" + std::to_string(kMinTimelineTweets) +
                      ", " + std::to_string(kMaxTimelineTweets) + "]");
  for (double p : {vocab_separation, pole_vocab_fraction, political_fraction,
                   pivot_political_fraction, negative_fraction, retweet_rate, retweet_pivot_rate,
                   other_user_retweet_rate, like_rate})
    if (p < 0.0 || p > 1.0) throw ConfigError("rates and fractions must be in [0, 1]");
  if (likes_per_user < 0) throw ConfigError("likes_per_user must be non-negative");
  if (likes_per_user > 0 && pivot_tweets_per_party <= 0)
    throw ConfigError("likes_per_user > 0 requires pivot tweets to like");
  if (retweet_rate > 0 && pivot_tweets_per_party <= 0 && other_user_retweet_rate < 1.0)
    throw ConfigError("retweets of pivots require pivot tweets to exist");
  if (party_vocab_size < 1 || pole_vocab_size < 1 || shared_vocab_size < 1 || noise_vocab_size < 1)
    throw ConfigError("vocabulary pools must be non-empty");
  if (tweet_tokens_min < 1 || tweet_tokens_min > tweet_tokens_max)
    throw ConfigError("bad tweet_tokens range");
  if (negative_fraction > 0 && n_poles < 2)
    throw ConfigError("negative tweets need at least two poles to attack across");
}

namespace {

std::string pad_number(int v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

std::string random_word(Rng& rng, std::set<std::string>& used) {
  static const char letters[] = "abcdefghijklmnopqrstuvwxyz";
  for (;;) {
    const int len = static_cast<int>(rng.uniform_int(5, 9));
    std::string w;
    for (int i = 0; i < len; ++i) w += letters[rng.index(26)];
    if (used.insert(w).second) return w;
  }
}

std::vector<std::string> make_pool(Rng& rng, int size, std::set<std::string>& used) {
  std::vector<std::string> pool;
  pool.reserve(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) pool.push_back(random_word(rng, used));
  return pool;
}

const std::string& pick(Rng& rng, const std::vector<std::string>& pool) {
  return pool[rng.index(pool.size())];
}

}  // namespace

GenResult generate_corpus(const GenConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  GenResult res;

  const int party_width = static_cast<int>(std::to_string(cfg.n_parties).size());
  const int user_width = static_cast<int>(std::to_string(cfg.n_users).size());

  // Poles split the parties into contiguous, near-equal blocks.
  std::vector<Party> parties;
  std::vector<int> pole_of_party(static_cast<std::size_t>(cfg.n_parties));
  for (int p = 0; p < cfg.n_parties; ++p) {
    const int pole = p * cfg.n_poles / cfg.n_parties;
    pole_of_party[static_cast<std::size_t>(p)] = pole;
    const std::string label = "party_" + pad_number(p + 1, party_width);
    parties.push_back({label, "pole_" + std::to_string(pole + 1), "pivot_" + label});
  }
  res.corpus.catalog = PartyCatalog(parties);

  Rng vocab_rng(derive_seed(seed, "synth.vocab"));
  std::set<std::string> used;
  std::vector<std::vector<std::string>> party_pool, pole_pool;
  for (int p = 0; p < cfg.n_parties; ++p) {
    party_pool.push_back(make_pool(vocab_rng, cfg.party_vocab_size, used));
    res.party_vocab[parties[static_cast<std::size_t>(p)].label] =
        std::set<std::string>(party_pool.back().begin(), party_pool.back().end());
  }
  for (int g = 0; g < cfg.n_poles; ++g) {
    pole_pool.push_back(make_pool(vocab_rng, cfg.pole_vocab_size, used));
    res.pole_vocab["pole_" + std::to_string(g + 1)] =
        std::set<std::string>(pole_pool.back().begin(), pole_pool.back().end());
  }
  const std::vector<std::string> shared = make_pool(vocab_rng, cfg.shared_vocab_size, used);
  const std::vector<std::string> noise = make_pool(vocab_rng, cfg.noise_vocab_size, used);
  const std::vector<std::string> negation = make_pool(vocab_rng, cfg.negation_vocab_size, used);
  res.shared_vocab = std::set<std::string>(shared.begin(), shared.end());
  res.noise_vocab = std::set<std::string>(noise.begin(), noise.end());
  res.negation_vocab = std::set<std::string>(negation.begin(), negation.end());

  const std::int64_t t0 = parse_iso8601(cfg.time_from);
  const std::int64_t t1 = parse_iso8601(cfg.time_to);
  if (t1 <= t0) throw ConfigError("time_to must be after time_from");

  Rng text_rng(derive_seed(seed, "synth.text"));

  // Tokens of a political message by party `p` (negative ones swap in the
  // opponent's vocabulary below, so `p` here is whose words are used).
  auto political_tokens = [&](int p, int n, std::vector<std::string>& out) {
    const int pole = pole_of_party[static_cast<std::size_t>(p)];
    for (int i = 0; i < n; ++i) {
      if (text_rng.uniform() < cfg.vocab_separation) {
        if (text_rng.uniform() < cfg.pole_vocab_fraction)
          out.push_back(pick(text_rng, pole_pool[static_cast<std::size_t>(pole)]));
        else
          out.push_back(pick(text_rng, party_pool[static_cast<std::size_t>(p)]));
      } else {
        out.push_back(pick(text_rng, shared));
      }
    }
  };

  auto join = [](const std::vector<std::string>& tokens) {
    std::string s;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) s += ' ';
      s += tokens[i];
    }
    return s;
  };

  auto tweet_len = [&]() {
    return static_cast<int>(text_rng.uniform_int(cfg.tweet_tokens_min, cfg.tweet_tokens_max));
  };

  // Pivot timelines: mostly the party's own political voice, with a share of
  // ordinary chatter, never retweets. The chatter matters: it is labeled with
  // the party like everything else the account posts, which is exactly the
  // label noise distant supervision has to live with, and it keeps neutral
  // text inside the classifier's training distribution.
  int tweet_counter = 0;
  std::vector<std::vector<std::string>> pivot_tweet_ids(static_cast<std::size_t>(cfg.n_parties));
  for (int p = 0; p < cfg.n_parties; ++p) {
    const Party& party = parties[static_cast<std::size_t>(p)];
    Timeline tl;
    tl.user_id = party.pivot_user_id;
    for (int i = 0; i < cfg.pivot_tweets_per_party; ++i) {
      Tweet t;
      t.tweet_id = "t" + pad_number(++tweet_counter, 8);
      t.user_id = party.pivot_user_id;
      std::vector<std::string> tokens;
      const int n = tweet_len();
      if (text_rng.uniform() < cfg.pivot_political_fraction)
        political_tokens(p, n, tokens);
      else
        for (int k = 0; k < n; ++k) tokens.push_back(pick(text_rng, noise));
      t.text = join(tokens);
      t.created_at = t0 + text_rng.uniform_int(0, t1 - t0 - 1);
      tl.tweets.push_back(std::move(t));
    }
    std::sort(tl.tweets.begin(), tl.tweets.end(), [](const Tweet& a, const Tweet& b) {
      if (a.created_at != b.created_at) return a.created_at > b.created_at;
      return a.tweet_id < b.tweet_id;
    });
    for (const Tweet& t : tl.tweets) pivot_tweet_ids[static_cast<std::size_t>(p)].push_back(t.tweet_id);
    res.corpus.pivots[party.label] = std::move(tl);
  }

  // Users: planted party by round robin, which keeps classes exactly balanced.
  std::vector<std::string> user_ids;
  for (int u = 0; u < cfg.n_users; ++u) user_ids.push_back("u" + pad_number(u + 1, user_width));
  for (int u = 0; u < cfg.n_users; ++u) {
    const int p = u % cfg.n_parties;
    const int pole = pole_of_party[static_cast<std::size_t>(p)];
    const std::string& uid = user_ids[static_cast<std::size_t>(u)];
    res.truth[uid] = parties[static_cast<std::size_t>(p)].label;

    Timeline tl;
    tl.user_id = uid;
    const int n_tweets = static_cast<int>(text_rng.uniform_int(cfg.tweets_per_user_min, cfg.tweets_per_user_max));
    for (int i = 0; i < n_tweets; ++i) {
      Tweet t;
      t.tweet_id = "t" + pad_number(++tweet_counter, 8);
      t.user_id = uid;
      t.created_at = t0 + text_rng.uniform_int(0, t1 - t0 - 1);

      if (text_rng.uniform() < cfg.retweet_rate) {
        t.is_retweet = true;
        std::vector<std::string> tokens;
        if (text_rng.uniform() < cfg.retweet_pivot_rate) {
          t.retweet_of_user = parties[static_cast<std::size_t>(p)].pivot_user_id;
          political_tokens(p, tweet_len(), tokens);
        } else if (text_rng.uniform() < cfg.other_user_retweet_rate && cfg.n_users > 1) {
          std::size_t other;
          do {
            other = text_rng.index(user_ids.size());
          } while (static_cast<int>(other) == u);
          t.retweet_of_user = user_ids[other];
          const int m = tweet_len();
          for (int k = 0; k < m; ++k) tokens.push_back(pick(text_rng, noise));
        } else {
          int q;
          do {
            q = static_cast<int>(text_rng.index(static_cast<std::size_t>(cfg.n_parties)));
          } while (q == p);
          t.retweet_of_user = parties[static_cast<std::size_t>(q)].pivot_user_id;
          political_tokens(q, tweet_len(), tokens);
        }
        t.text = "RT @" + t.retweet_of_user + ": " + join(tokens);
      } else if (text_rng.uniform() < cfg.political_fraction) {
        std::vector<std::string> tokens;
        if (text_rng.uniform() < cfg.negative_fraction) {
          // Attack post: the author's words borrow the opponent's vocabulary,
          // framed by negation markers. The label stays the author's party.
          int q;
          do {
            q = static_cast<int>(text_rng.index(static_cast<std::size_t>(cfg.n_parties)));
          } while (pole_of_party[static_cast<std::size_t>(q)] == pole);
          tokens.push_back(pick(text_rng, negation));
          political_tokens(q, tweet_len(), tokens);
          tokens.push_back(pick(text_rng, negation));
        } else {
          political_tokens(p, tweet_len(), tokens);
        }
        t.text = join(tokens);
      } else {
        std::vector<std::string> tokens;
        const int m = tweet_len();
        for (int k = 0; k < m; ++k) tokens.push_back(pick(text_rng, noise));
        t.text = join(tokens);
      }
      tl.tweets.push_back(std::move(t));
    }
    std::sort(tl.tweets.begin(), tl.tweets.end(), [](const Tweet& a, const Tweet& b) {
      if (a.created_at != b.created_at) return a.created_at > b.created_at;
      return a.tweet_id < b.tweet_id;
    });
    res.corpus.users[uid] = std::move(tl);
  }

  // Likes: mostly the planted party's pivot tweets, with uniform noise.
  Rng like_rng(derive_seed(seed, "synth.likes"));
  if (cfg.likes_per_user > 0) {
    std::set<std::pair<std::string, std::string>> seen;
    for (int u = 0; u < cfg.n_users; ++u) {
      const int p = u % cfg.n_parties;
      const std::string& uid = user_ids[static_cast<std::size_t>(u)];
      for (int i = 0; i < cfg.likes_per_user; ++i) {
        int target = p;
        if (like_rng.uniform() >= cfg.like_rate && cfg.n_parties > 1) {
          do {
            target = static_cast<int>(like_rng.index(static_cast<std::size_t>(cfg.n_parties)));
          } while (target == p);
        }
        const auto& ids = pivot_tweet_ids[static_cast<std::size_t>(target)];
        const std::string& tweet = ids[like_rng.index(ids.size())];
        if (!seen.emplace(uid, tweet).second) continue;
        res.corpus.likes.edges.emplace_back(uid, tweet);
        res.corpus.likes.tweet_party[tweet] = parties[static_cast<std::size_t>(target)].label;
      }
    }
  }
  return res;
}

}  // namespace ideolens
