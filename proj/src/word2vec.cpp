#include "ideolens/word2vec.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string_view>
#include <utility>

#include <nlohmann/json.hpp>

#include "ideolens/errors.hpp"
#include "ideolens/io.hpp"
#include "ideolens/rng.hpp"

namespace ideolens {

namespace {

using nlohmann::json;

constexpr char kVectorsMagic[] = "ILENSV1\n";
constexpr double kUnigramPower = 0.75;

bool keeps_byte(unsigned char c) {
  if (c >= 0x80) return true;  // part of a multi-byte sequence
  if (std::isalnum(c)) return true;
  return c == '#' || c == '@' || c == '_';
}

}  // namespace

std::vector<std::string> tokenize_tweet(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (keeps_byte(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::unordered_set<std::string> words;
  for (std::string line : read_lines(path)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) words.insert(line);
  }
  return words;
}

void Word2VecConfig::validate() const {
  if (dim < 1) throw ConfigError("embedding dim must be positive");
  if (window < 1) throw ConfigError("window must be positive");
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (negative_samples < 1) throw ConfigError("negative_samples must be positive");
  if (max_vocab < 1) throw ConfigError("max_vocab must be positive");
  if (min_count < 1) throw ConfigError("min_count must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
}

int EmbeddingModel::index_of(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

Vecd EmbeddingModel::embed_tweet(const std::string& text) const {
  Vecd sum = Vecd::Zero(dim());
  int hits = 0;
  for (const std::string& token : tokenize_tweet(text)) {
    const int idx = index_of(token);
    if (idx < 0) continue;
    sum += vectors_.row(idx).transpose();
    ++hits;
  }
  if (hits > 0) sum /= static_cast<double>(hits);
  return sum;
}

Vecd EmbeddingModel::embed_user(const Timeline& timeline) const {
  Vecd sum = Vecd::Zero(dim());
  if (timeline.tweets.empty()) return sum;
  for (const Tweet& tweet : timeline.tweets) sum += embed_tweet(tweet.text);
  return sum / static_cast<double>(timeline.tweets.size());
}

void EmbeddingModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  json meta;
  meta["format"] = "ideolens-word2vec-v1";
  meta["dim"] = dim();
  meta["vocabulary"] = vocab_;
  atomic_write(dir / "vocabulary.json", meta.dump(2) + "\n");

  const std::filesystem::path tmp = dir / "vectors.bin.tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(kVectorsMagic, sizeof(kVectorsMagic) - 1);
    const std::uint32_t rows = static_cast<std::uint32_t>(vectors_.rows());
    const std::uint32_t cols = static_cast<std::uint32_t>(vectors_.cols());
    out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    out.write(reinterpret_cast<const char*>(vectors_.data()),
              static_cast<std::streamsize>(sizeof(double) * vectors_.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, dir / "vectors.bin");
}

EmbeddingModel EmbeddingModel::load(const std::filesystem::path& dir) {
  json meta;
  try {
    meta = json::parse(read_file(dir / "vocabulary.json"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad vocabulary file: ") + e.what());
  }
  if (meta.value("format", "") != "ideolens-word2vec-v1")
    throw ParseError("unrecognized embedding artifact format");

  EmbeddingModel model;
  model.vocab_ = meta.at("vocabulary").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < model.vocab_.size(); ++i)
    model.index_[model.vocab_[i]] = static_cast<int>(i);

  std::ifstream in(dir / "vectors.bin", std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + (dir / "vectors.bin").string());
  char magic[sizeof(kVectorsMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::string_view(magic, sizeof(magic)) != std::string_view(kVectorsMagic, sizeof(magic)))
    throw ParseError("bad vectors file magic");
  std::uint32_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!in || rows != model.vocab_.size() || cols != meta.at("dim").get<std::uint32_t>())
    throw ParseError("vectors file does not match vocabulary");
  model.vectors_.resize(rows, cols);
  in.read(reinterpret_cast<char*>(model.vectors_.data()),
          static_cast<std::streamsize>(sizeof(double) * model.vectors_.size()));
  if (!in) throw ParseError("vectors file truncated");
  return model;
}

EmbeddingModel train_embeddings(const Corpus& corpus, const Word2VecConfig& cfg,
                                const std::unordered_set<std::string>& stopwords) {
  cfg.validate();

  // Pass 1: token counts over every timeline, stopwords excluded.
  std::map<std::string, std::int64_t> counts;
  const auto count_timeline = [&](const Timeline& t) {
    for (const Tweet& tweet : t.tweets)
      for (std::string& token : tokenize_tweet(tweet.text))
        if (!stopwords.count(token)) ++counts[std::move(token)];
  };
  for (const auto& [id, timeline] : corpus.users) count_timeline(timeline);
  for (const auto& [label, timeline] : corpus.pivots) count_timeline(timeline);

  // Vocabulary: most frequent first, alphabetical among equals, capped.
  std::vector<std::pair<std::string, std::int64_t>> ranked;
  ranked.reserve(counts.size());
  for (const auto& [token, n] : counts)
    if (n >= cfg.min_count) ranked.emplace_back(token, n);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > static_cast<std::size_t>(cfg.max_vocab)) ranked.resize(cfg.max_vocab);
  if (ranked.empty()) throw ValidationError("no tokens survive stopword and frequency filtering");

  EmbeddingModel model;
  model.vocab_.reserve(ranked.size());
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    model.vocab_.push_back(ranked[i].first);
    model.index_[ranked[i].first] = static_cast<int>(i);
  }
  const int vocab = model.vocab_size();

  // Pass 2: sentences as in-vocabulary token-id sequences; one per tweet.
  std::vector<std::vector<int>> sentences;
  std::int64_t total_tokens = 0;
  const auto collect_timeline = [&](const Timeline& t) {
    for (const Tweet& tweet : t.tweets) {
      std::vector<int> ids;
      for (const std::string& token : tokenize_tweet(tweet.text)) {
        const int idx = model.index_of(token);
        if (idx >= 0) ids.push_back(idx);
      }
      if (ids.size() >= 2) {
        total_tokens += static_cast<std::int64_t>(ids.size());
        sentences.push_back(std::move(ids));
      }
    }
  };
  for (const auto& [id, timeline] : corpus.users) collect_timeline(timeline);
  for (const auto& [label, timeline] : corpus.pivots) collect_timeline(timeline);

  // Unigram^0.75 distribution for negative sampling.
  std::vector<double> cumulative(ranked.size());
  double running = 0.0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    running += std::pow(static_cast<double>(ranked[i].second), kUnigramPower);
    cumulative[i] = running;
  }

  Rng rng(derive_seed(cfg.seed, "word2vec"));
  Matd& w_in = model.vectors_;
  w_in.resize(vocab, cfg.dim);
  for (Eigen::Index i = 0; i < w_in.size(); ++i)
    w_in.data()[i] = rng.uniform(-0.5, 0.5) / cfg.dim;
  Matd w_out = Matd::Zero(vocab, cfg.dim);

  const auto sample_negative = [&]() {
    const double u = rng.uniform(0.0, running);
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const std::size_t idx = static_cast<std::size_t>(it - cumulative.begin());
    return static_cast<int>(std::min(idx, cumulative.size() - 1));
  };

  std::vector<std::size_t> order(sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const double total_work =
      static_cast<double>(cfg.epochs) * static_cast<double>(std::max<std::int64_t>(total_tokens, 1));
  const double min_lr = cfg.learning_rate * 1e-4;
  std::int64_t processed = 0;
  RowVecd grad_in(cfg.dim);

  if (sentences.empty()) throw ValidationError("no sentence has two in-vocabulary tokens");

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (const std::size_t si : order) {
      const std::vector<int>& sen = sentences[si];
      const int len = static_cast<int>(sen.size());
      for (int pos = 0; pos < len; ++pos) {
        const double frac = static_cast<double>(processed++) / total_work;
        const double lr = std::max(min_lr, cfg.learning_rate * (1.0 - frac));
        const int center = sen[pos];
        const int reach = static_cast<int>(rng.uniform_int(1, cfg.window));
        for (int off = -reach; off <= reach; ++off) {
          if (off == 0) continue;
          const int cpos = pos + off;
          if (cpos < 0 || cpos >= len) continue;
          const int context = sen[cpos];
          // Input vector of the context word learns to score the center
          // word high and sampled words low.
          grad_in.setZero();
          for (int s = 0; s <= cfg.negative_samples; ++s) {
            int target = center;
            double label = 1.0;
            if (s > 0) {
              target = sample_negative();
              if (target == center) continue;
              label = 0.0;
            }
            const double dot = w_in.row(context).dot(w_out.row(target));
            const double sigma = 1.0 / (1.0 + std::exp(-dot));
            const double g = (label - sigma) * lr;
            grad_in += g * w_out.row(target);
            w_out.row(target) += g * w_in.row(context);
          }
          w_in.row(context) += grad_in;
        }
      }
    }
  }
  return model;
}

UserVectors word2vec_user_vectors(const EmbeddingModel& model, const Corpus& corpus) {
  UserVectors out;
  out.vectors.resize(static_cast<Eigen::Index>(corpus.users.size()), model.dim());
  Eigen::Index row = 0;
  for (const auto& [id, timeline] : corpus.users) {
    out.user_ids.push_back(id);
    out.vectors.row(row++) = model.embed_user(timeline).transpose();
  }
  return out;
}

Matd word2vec_pivot_vectors(const EmbeddingModel& model, const Corpus& corpus) {
  Matd pivots(corpus.catalog.size(), model.dim());
  for (int p = 0; p < corpus.catalog.size(); ++p) {
    const std::string& label = corpus.catalog.party(p).label;
    const auto it = corpus.pivots.find(label);
    if (it == corpus.pivots.end())
      throw ValidationError("missing pivot timeline for party " + label);
    pivots.row(p) = model.embed_user(it->second).transpose();
  }
  return pivots;
}

}  // namespace ideolens
