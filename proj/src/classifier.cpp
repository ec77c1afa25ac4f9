#include "ideolens/classifier.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "ideolens/errors.hpp"
#include "ideolens/io.hpp"
#include "ideolens/text.hpp"

namespace ideolens {

using nlohmann::json;

std::map<std::string, std::int64_t> LabeledTweetSet::label_counts() const {
  std::map<std::string, std::int64_t> counts;
  for (const Item& it : items) counts[it.label]++;
  return counts;
}

LabeledTweetSet build_pivot_training_set(const Corpus& corpus, int per_party_cap) {
  if (per_party_cap <= 0) throw ConfigError("per_party_cap must be positive");
  LabeledTweetSet out;
  for (const Party& party : corpus.catalog.parties()) {
    auto it = corpus.pivots.find(party.label);
    if (it == corpus.pivots.end() || it->second.tweets.empty())
      throw ValidationError("no pivot tweets for party '" + party.label + "'");
    const auto& tweets = it->second.tweets;  // most recent first
    const std::size_t n = std::min<std::size_t>(tweets.size(), static_cast<std::size_t>(per_party_cap));
    for (std::size_t i = 0; i < n; ++i)
      out.items.push_back({tweets[i], party.label, Provenance::pivot});
  }
  return out;
}

CharEncoder CharEncoder::fit(const LabeledTweetSet& tweets, int min_char_freq, int max_len) {
  if (min_char_freq < 1) throw ConfigError("min_char_freq must be at least 1");
  if (max_len < 1) throw ConfigError("max_len must be positive");
  std::map<char32_t, std::int64_t> freq;
  for (const auto& item : tweets.items)
    for (char32_t cp : utf8_decode(item.tweet.text)) freq[cp]++;

  std::vector<std::pair<char32_t, std::int64_t>> kept;
  for (const auto& [cp, n] : freq)
    if (n >= min_char_freq) kept.push_back({cp, n});
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  CharEncoder enc;
  enc.max_len_ = max_len;
  for (const auto& [cp, n] : kept) {
    enc.index_[cp] = static_cast<int>(enc.chars_.size()) + 2;
    enc.chars_.push_back(cp);
  }
  return enc;
}

std::vector<int> CharEncoder::encode(const std::string& text) const {
  std::vector<int> out(static_cast<std::size_t>(max_len_), kPad);
  const std::vector<char32_t> cps = utf8_decode(text);
  const std::size_t n = std::min<std::size_t>(cps.size(), static_cast<std::size_t>(max_len_));
  for (std::size_t i = 0; i < n; ++i) {
    auto it = index_.find(cps[i]);
    out[i] = it == index_.end() ? kUnknown : it->second;
  }
  return out;
}

Eigen::MatrixXi CharEncoder::encode_batch(const std::vector<const Tweet*>& tweets) const {
  Eigen::MatrixXi m(static_cast<Eigen::Index>(tweets.size()), max_len_);
  for (std::size_t b = 0; b < tweets.size(); ++b) {
    const std::vector<int> row = encode(tweets[b]->text);
    for (int t = 0; t < max_len_; ++t) m(static_cast<Eigen::Index>(b), t) = row[static_cast<std::size_t>(t)];
  }
  return m;
}

json CharEncoder::to_json() const {
  std::vector<std::uint32_t> cps(chars_.begin(), chars_.end());
  return json{{"max_len", max_len_}, {"pad_index", kPad}, {"unknown_index", kUnknown}, {"chars", cps}};
}

CharEncoder CharEncoder::from_json(const json& j) {
  CharEncoder enc;
  try {
    enc.max_len_ = j.at("max_len").get<int>();
    for (std::uint32_t cp : j.at("chars").get<std::vector<std::uint32_t>>()) {
      enc.index_[static_cast<char32_t>(cp)] = static_cast<int>(enc.chars_.size()) + 2;
      enc.chars_.push_back(static_cast<char32_t>(cp));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad encoder json: ") + e.what());
  }
  return enc;
}

net::NetConfig ClassifierConfig::net_config(int vocab_size, int n_classes) const {
  net::NetConfig nc;
  nc.vocab_size = vocab_size;
  nc.max_len = max_len;
  nc.embedding_dim = embedding_dim;
  nc.conv_filters = conv_filters;
  nc.conv_width = conv_width;
  nc.pool_width = pool_width;
  nc.transformer_layers = transformer_layers;
  nc.attention_heads = attention_heads;
  nc.model_dim = model_dim;
  nc.ffn_dim = ffn_dim;
  nc.dense_dim = dense_dim;
  nc.n_classes = n_classes;
  nc.dropout = dropout;
  return nc;
}

json ClassifierConfig::to_json() const {
  return json{{"embedding_dim", embedding_dim},
              {"conv_filters", conv_filters},
              {"conv_width", conv_width},
              {"pool_width", pool_width},
              {"transformer_layers", transformer_layers},
              {"attention_heads", attention_heads},
              {"model_dim", model_dim},
              {"ffn_dim", ffn_dim},
              {"dense_dim", dense_dim},
              {"dropout", dropout},
              {"max_len", max_len},
              {"min_char_freq", min_char_freq},
              {"epochs", epochs},
              {"batch_size", batch_size},
              {"learning_rate", learning_rate},
              {"early_stop_patience", early_stop_patience},
              {"seed", seed}};
}

ClassifierConfig ClassifierConfig::from_json(const json& j) {
  ClassifierConfig c;
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.conv_filters = j.value("conv_filters", c.conv_filters);
  c.conv_width = j.value("conv_width", c.conv_width);
  c.pool_width = j.value("pool_width", c.pool_width);
  c.transformer_layers = j.value("transformer_layers", c.transformer_layers);
  c.attention_heads = j.value("attention_heads", c.attention_heads);
  c.model_dim = j.value("model_dim", c.model_dim);
  c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
  c.dense_dim = j.value("dense_dim", c.dense_dim);
  c.dropout = j.value("dropout", c.dropout);
  c.max_len = j.value("max_len", c.max_len);
  c.min_char_freq = j.value("min_char_freq", c.min_char_freq);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.seed = j.value("seed", c.seed);
  return c;
}

namespace {

struct EncodedSet {
  Eigen::MatrixXi x;
  std::vector<int> y;
};

EncodedSet encode_set(const LabeledTweetSet& set, const CharEncoder& enc,
                      const PartyCatalog& catalog) {
  EncodedSet out;
  std::vector<const Tweet*> tweets;
  tweets.reserve(set.items.size());
  for (const auto& item : set.items) {
    const int cls = catalog.index_of(item.label);
    if (cls < 0) throw ValidationError("training label outside the catalog: '" + item.label + "'");
    tweets.push_back(&item.tweet);
    out.y.push_back(cls);
  }
  out.x = enc.encode_batch(tweets);
  return out;
}

double accuracy(const net::TextNet<float>& net, const EncodedSet& val, int eval_batch) {
  if (val.y.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::int64_t hits = 0;
  for (Eigen::Index start = 0; start < val.x.rows(); start += eval_batch) {
    const Eigen::Index n = std::min<Eigen::Index>(eval_batch, val.x.rows() - start);
    const Matf logits = net.logits(val.x.middleRows(start, n));
    for (Eigen::Index b = 0; b < n; ++b) {
      Eigen::Index arg;
      logits.row(b).maxCoeff(&arg);
      if (static_cast<int>(arg) == val.y[static_cast<std::size_t>(start + b)]) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(val.y.size());
}

}  // namespace

TweetClassifier TweetClassifier::train(const LabeledTweetSet& train_set,
                                       const LabeledTweetSet& val_set, const CharEncoder& encoder,
                                       const ClassifierConfig& cfg, const PartyCatalog& catalog) {
  if (train_set.items.empty()) throw ValidationError("empty training set");
  std::set<std::string> distinct;
  for (const auto& item : train_set.items) distinct.insert(item.label);
  if (distinct.size() < 2)
    throw ValidationError("training set must contain at least two parties");
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw ConfigError("epochs and batch_size must be positive");

  const net::NetConfig netcfg = cfg.net_config(encoder.vocab_size(), catalog.size());
  netcfg.validate();
  TweetClassifier clf(encoder, netcfg, cfg.seed);
  clf.cfg_ = cfg;
  clf.class_labels_ = catalog.labels();

  const EncodedSet train = encode_set(train_set, clf.encoder_, catalog);
  const EncodedSet val = encode_set(val_set, clf.encoder_, catalog);

  Rng shuffle_rng(derive_seed(cfg.seed, "classifier.shuffle"));
  Rng dropout_rng(derive_seed(cfg.seed, "classifier.dropout"));
  net::Adam<float> opt(netcfg, cfg.learning_rate);
  net::Cache<float> cache;
  net::NetParams<float> grads;

  std::vector<std::size_t> order(train.y.size());
  std::iota(order.begin(), order.end(), 0);

  double best_acc = -1.0;
  int since_best = 0;
  net::NetParams<float> best_params;
  const int eval_batch = std::max(cfg.batch_size, 128);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::int64_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                                  order.size() - start);
      Eigen::MatrixXi batch(static_cast<Eigen::Index>(n), clf.encoder_.max_len());
      std::vector<int> labels(n);
      for (std::size_t i = 0; i < n; ++i) {
        batch.row(static_cast<Eigen::Index>(i)) = train.x.row(static_cast<Eigen::Index>(order[start + i]));
        labels[i] = train.y[order[start + i]];
      }
      clf.net_.forward(batch, true, &dropout_rng, cache);
      const float loss = clf.net_.loss_and_grad(cache, labels, grads);
      opt.step(clf.net_.params(), grads);
      loss_sum += static_cast<double>(loss) * static_cast<double>(n);
      seen += static_cast<std::int64_t>(n);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(seen);
    stats.val_accuracy = accuracy(clf.net_, val, eval_batch);
    clf.history_.push_back(stats);

    if (!val.y.empty()) {
      if (stats.val_accuracy > best_acc + 1e-12) {
        best_acc = stats.val_accuracy;
        best_params = clf.net_.params();
        since_best = 0;
      } else {
        ++since_best;
        if (since_best >= cfg.early_stop_patience) break;
      }
    }
  }
  if (best_acc >= 0.0) clf.net_.params() = best_params;
  return clf;
}

TweetClassifier TweetClassifier::retrain_enriched(const LabeledTweetSet& base,
                                                  const LabeledTweetSet& enrichment,
                                                  const LabeledTweetSet& val_set,
                                                  const CharEncoder& encoder,
                                                  const ClassifierConfig& cfg,
                                                  const PartyCatalog& catalog) {
  LabeledTweetSet merged = base;
  merged.items.insert(merged.items.end(), enrichment.items.begin(), enrichment.items.end());
  return train(merged, val_set, encoder, cfg, catalog);
}

Matd TweetClassifier::score(const std::vector<const Tweet*>& tweets) const {
  Matd out(static_cast<Eigen::Index>(tweets.size()), n_classes());
  const int chunk = 256;
  for (std::size_t start = 0; start < tweets.size(); start += chunk) {
    const std::size_t n = std::min<std::size_t>(chunk, tweets.size() - start);
    std::vector<const Tweet*> slice(tweets.begin() + static_cast<std::ptrdiff_t>(start),
                                    tweets.begin() + static_cast<std::ptrdiff_t>(start + n));
    const Matf logits = net_.logits(encoder_.encode_batch(slice));
    for (std::size_t b = 0; b < n; ++b) {
      // Softmax in double so each row sums to 1 tightly.
      Vecd row = logits.row(static_cast<Eigen::Index>(b)).transpose().cast<double>();
      row.array() -= row.maxCoeff();
      row = row.array().exp();
      out.row(static_cast<Eigen::Index>(start + b)) = (row / row.sum()).transpose();
    }
  }
  return out;
}

Vecd TweetClassifier::classify(const Tweet& tweet) const {
  return score({&tweet}).row(0).transpose();
}

namespace {

constexpr char kWeightsMagic[] = "ILENSW1\n";

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void TweetClassifier::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  json cfg_json;
  cfg_json["format"] = "ideolens-classifier-v1";
  cfg_json["classifier"] = cfg_.to_json();
  cfg_json["classes"] = class_labels_;
  cfg_json["vocab_size"] = encoder_.vocab_size();
  atomic_write(dir / "config.json", cfg_json.dump(2) + "\n");
  atomic_write(dir / "encoder.json", encoder_.to_json().dump(2) + "\n");

  const std::filesystem::path tmp = dir / "weights.bin.tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(kWeightsMagic, sizeof(kWeightsMagic) - 1);
    net_.params().visit([&out](const std::string& name, const Matf& m) {
      write_u32(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_u32(out, static_cast<std::uint32_t>(m.rows()));
      write_u32(out, static_cast<std::uint32_t>(m.cols()));
      out.write(reinterpret_cast<const char*>(m.data()),
                static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(m.size())));
    });
  }
  std::filesystem::rename(tmp, dir / "weights.bin");
}

TweetClassifier TweetClassifier::load(const std::filesystem::path& dir) {
  json cfg_json;
  try {
    cfg_json = json::parse(read_file(dir / "config.json"));
  } catch (const json::parse_error& e) {
    throw ParseError("classifier config: " + std::string(e.what()));
  }
  if (cfg_json.value("format", "") != "ideolens-classifier-v1")
    throw ParseError("unrecognized classifier artifact format");
  const ClassifierConfig cfg = ClassifierConfig::from_json(cfg_json.at("classifier"));
  CharEncoder encoder;
  try {
    encoder = CharEncoder::from_json(json::parse(read_file(dir / "encoder.json")));
  } catch (const json::parse_error& e) {
    throw ParseError("classifier encoder: " + std::string(e.what()));
  }
  const auto classes = cfg_json.at("classes").get<std::vector<std::string>>();

  TweetClassifier clf(encoder, cfg.net_config(encoder.vocab_size(), static_cast<int>(classes.size())),
                      cfg.seed);
  clf.cfg_ = cfg;
  clf.class_labels_ = classes;

  std::ifstream in(dir / "weights.bin", std::ios::binary);
  if (!in) throw ConfigError("cannot open " + (dir / "weights.bin").string());
  char magic[sizeof(kWeightsMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::string_view(magic, sizeof(magic)) != std::string_view(kWeightsMagic, sizeof(magic)))
    throw ParseError("bad weights file magic");
  clf.net_.params().visit([&in, &dir](const std::string& name, Matf& m) {
    const std::uint32_t name_len = read_u32(in);
    std::string stored(name_len, '\0');
    in.read(stored.data(), name_len);
    const std::uint32_t rows = read_u32(in);
    const std::uint32_t cols = read_u32(in);
    if (!in || stored != name || static_cast<Eigen::Index>(rows) != m.rows() ||
        static_cast<Eigen::Index>(cols) != m.cols())
      throw ParseError("weights file does not match the architecture (tensor '" + name +
                       "' in " + (dir / "weights.bin").string() + ")");
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(m.size())));
    if (!in) throw ParseError("weights file truncated at tensor '" + name + "'");
  });
  return clf;
}

void TweetClassifier::save_training_log(const std::filesystem::path& path, std::uint64_t hash,
                                        std::uint64_t seed) const {
  std::string out = csv_meta_line(hash, seed);
  out += "epoch,train_loss,val_accuracy\n";
  for (const EpochStats& s : history_) {
    out += std::to_string(s.epoch);
    out += ',' + format_double(s.train_loss);
    out += ',' + format_double(s.val_accuracy);
    out += '\n';
  }
  atomic_write(path, out);
}

}  // namespace ideolens
