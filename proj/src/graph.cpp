#include "ideolens/graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "ideolens/errors.hpp"
#include "ideolens/io.hpp"
#include "ideolens/rng.hpp"
#include "ideolens/text.hpp"

namespace ideolens {

int SimilarityNetwork::index_of(const std::string& user) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), user);
  if (it == nodes.end() || *it != user) return -1;
  return static_cast<int>(it - nodes.begin());
}

SimilarityNetwork project_bipartite(const LikeGraph& likes) {
  SimilarityNetwork net;
  std::set<std::string> users;
  for (const auto& [user, tweet] : likes.edges) users.insert(user);
  net.nodes.assign(users.begin(), users.end());

  std::map<std::string, std::vector<int>> likers_of_tweet;
  for (const auto& [user, tweet] : likes.edges)
    likers_of_tweet[tweet].push_back(net.index_of(user));

  std::map<std::pair<int, int>, double> weight;
  for (auto& [tweet, likers] : likers_of_tweet) {
    std::sort(likers.begin(), likers.end());
    for (std::size_t i = 0; i < likers.size(); ++i)
      for (std::size_t j = i + 1; j < likers.size(); ++j)
        weight[{likers[i], likers[j]}] += 1.0;
  }
  net.edges.reserve(weight.size());
  for (const auto& [uv, w] : weight) net.edges.emplace_back(uv.first, uv.second, w);
  return net;
}

namespace {

struct Adjacency {
  std::vector<std::vector<std::pair<int, double>>> nbrs;
  std::vector<double> self_loop;
  std::vector<double> degree;  // weighted, self loops counted twice
  double total_weight = 0.0;   // sum of all edge weights (loops once)
};

Adjacency build_adjacency(int n, const std::vector<std::tuple<int, int, double>>& edges) {
  Adjacency a;
  a.nbrs.resize(static_cast<std::size_t>(n));
  a.self_loop.assign(static_cast<std::size_t>(n), 0.0);
  a.degree.assign(static_cast<std::size_t>(n), 0.0);
  for (const auto& [u, v, w] : edges) {
    if (u == v) {
      a.self_loop[static_cast<std::size_t>(u)] += w;
      a.degree[static_cast<std::size_t>(u)] += 2 * w;
    } else {
      a.nbrs[static_cast<std::size_t>(u)].push_back({v, w});
      a.nbrs[static_cast<std::size_t>(v)].push_back({u, w});
      a.degree[static_cast<std::size_t>(u)] += w;
      a.degree[static_cast<std::size_t>(v)] += w;
    }
    a.total_weight += w;
  }
  return a;
}

double partition_modularity(const Adjacency& a, const std::vector<int>& comm, double resolution) {
  if (a.total_weight <= 0) return 0.0;
  const double m2 = 2.0 * a.total_weight;
  const int n = static_cast<int>(comm.size());
  std::map<int, double> in_w, tot_w;
  for (int u = 0; u < n; ++u) {
    tot_w[comm[static_cast<std::size_t>(u)]] += a.degree[static_cast<std::size_t>(u)];
    in_w[comm[static_cast<std::size_t>(u)]] += 2 * a.self_loop[static_cast<std::size_t>(u)];
    for (const auto& [v, w] : a.nbrs[static_cast<std::size_t>(u)])
      if (comm[static_cast<std::size_t>(u)] == comm[static_cast<std::size_t>(v)]) in_w[comm[static_cast<std::size_t>(u)]] += w;
  }
  double q = 0.0;
  for (const auto& [c, iw] : in_w) {
    const double tw = tot_w[c];
    q += iw / m2 - resolution * (tw / m2) * (tw / m2);
  }
  return q;
}

// One level of local moving; returns the node->community map after
// convergence and whether anything moved.
bool local_moving(const Adjacency& a, double resolution, Rng& rng, std::vector<int>& comm) {
  const int n = static_cast<int>(a.degree.size());
  const double m2 = 2.0 * a.total_weight;
  std::vector<double> tot(static_cast<std::size_t>(n), 0.0);
  for (int u = 0; u < n; ++u) tot[static_cast<std::size_t>(comm[static_cast<std::size_t>(u)])] += a.degree[static_cast<std::size_t>(u)];

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  bool moved_any = false;
  bool improved = true;
  while (improved) {
    improved = false;
    for (int u : order) {
      const std::size_t su = static_cast<std::size_t>(u);
      const int old_c = comm[su];
      const double ku = a.degree[su];
      std::map<int, double> links;  // weight from u to each neighboring community
      links[old_c] += 0.0;
      for (const auto& [v, w] : a.nbrs[su]) links[comm[static_cast<std::size_t>(v)]] += w;

      tot[static_cast<std::size_t>(old_c)] -= ku;
      int best_c = old_c;
      double best_gain = links[old_c] - resolution * tot[static_cast<std::size_t>(old_c)] * ku / m2;
      for (const auto& [c, w] : links) {
        if (c == old_c) continue;
        const double gain = w - resolution * tot[static_cast<std::size_t>(c)] * ku / m2;
        // Move only on strict improvement; equal-gain moves could oscillate.
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best_c = c;
        }
      }
      tot[static_cast<std::size_t>(best_c)] += ku;
      if (best_c != old_c) {
        comm[su] = best_c;
        improved = true;
        moved_any = true;
      }
    }
  }
  return moved_any;
}

void renumber(std::vector<int>& comm) {
  std::map<int, int> remap;
  for (int& c : comm) {
    auto [it, inserted] = remap.emplace(c, static_cast<int>(remap.size()));
    c = it->second;
  }
}

}  // namespace

Partition louvain(const SimilarityNetwork& net, double resolution, std::uint64_t seed) {
  if (resolution <= 0) throw ConfigError("louvain resolution must be positive");
  const int n = static_cast<int>(net.nodes.size());
  Partition out;
  if (n == 0) return out;

  Rng rng(derive_seed(seed, "louvain"));
  std::vector<int> node_comm(static_cast<std::size_t>(n));
  std::iota(node_comm.begin(), node_comm.end(), 0);

  Adjacency level = build_adjacency(n, net.edges);
  if (level.total_weight <= 0) {
    for (int u = 0; u < n; ++u) out.community[net.nodes[static_cast<std::size_t>(u)]] = u;
    out.n_communities = n;
    out.modularity = 0.0;
    return out;
  }

  std::vector<int> comm = node_comm;  // current level labels
  std::vector<std::tuple<int, int, double>> edges = net.edges;
  std::vector<int> assign(static_cast<std::size_t>(n));
  std::iota(assign.begin(), assign.end(), 0);  // original node -> current level node

  for (;;) {
    Adjacency a = build_adjacency(static_cast<int>(comm.size()), edges);
    const bool moved = local_moving(a, resolution, rng, comm);
    renumber(comm);
    for (int u = 0; u < n; ++u)
      node_comm[static_cast<std::size_t>(u)] = comm[static_cast<std::size_t>(assign[static_cast<std::size_t>(u)])];
    if (!moved) break;

    // Aggregate: communities become nodes.
    const int nc = 1 + *std::max_element(comm.begin(), comm.end());
    std::map<std::pair<int, int>, double> agg;
    for (const auto& [u, v, w] : edges) {
      int cu = comm[static_cast<std::size_t>(u)], cv = comm[static_cast<std::size_t>(v)];
      if (cu > cv) std::swap(cu, cv);
      agg[{cu, cv}] += w;
    }
    edges.clear();
    for (const auto& [uv, w] : agg) edges.emplace_back(uv.first, uv.second, w);
    for (int u = 0; u < n; ++u) assign[static_cast<std::size_t>(u)] = node_comm[static_cast<std::size_t>(u)];
    comm.assign(static_cast<std::size_t>(nc), 0);
    std::iota(comm.begin(), comm.end(), 0);
  }

  // Stable community ids: first appearance over sorted node order.
  std::map<int, int> remap;
  for (int u = 0; u < n; ++u) {
    auto [it, ins] = remap.emplace(node_comm[static_cast<std::size_t>(u)], static_cast<int>(remap.size()));
    out.community[net.nodes[static_cast<std::size_t>(u)]] = it->second;
  }
  out.n_communities = static_cast<int>(remap.size());
  std::vector<int> final_comm(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) final_comm[static_cast<std::size_t>(u)] = out.community[net.nodes[static_cast<std::size_t>(u)]];
  out.modularity = partition_modularity(level, final_comm, resolution);
  return out;
}

std::map<std::string, std::string> label_communities(const Partition& partition,
                                                     const LikeGraph& likes,
                                                     const PartyCatalog& catalog) {
  // Per-user like counts toward each party.
  std::map<std::string, std::map<std::string, int>> user_counts;
  for (const auto& [user, tweet] : likes.edges) {
    auto it = likes.tweet_party.find(tweet);
    if (it == likes.tweet_party.end())
      throw ValidationError("like graph tweet without a party: " + tweet);
    user_counts[user][it->second] += 1;
  }

  struct Tally {
    std::map<std::string, int> votes;
    std::map<std::string, int> like_totals;
  };
  std::map<int, Tally> tallies;
  for (const auto& [user, comm] : partition.community) {
    auto uc = user_counts.find(user);
    if (uc == user_counts.end()) continue;  // member with no likes casts no vote
    Tally& tally = tallies[comm];
    std::string best;
    int best_count = -1;
    for (const auto& [party, count] : uc->second) {
      tally.like_totals[party] += count;
      if (count > best_count || (count == best_count && party < best)) {
        best = party;
        best_count = count;
      }
    }
    tally.votes[best] += 1;
  }

  std::map<int, std::string> label_of_comm;
  for (const auto& [comm, tally] : tallies) {
    std::string best;
    int best_votes = -1;
    for (const auto& [party, votes] : tally.votes) {
      const int total = tally.like_totals.count(party) ? tally.like_totals.at(party) : 0;
      if (best.empty()) {
        best = party;
        best_votes = votes;
        continue;
      }
      const int best_total = tally.like_totals.count(best) ? tally.like_totals.at(best) : 0;
      if (votes > best_votes ||
          (votes == best_votes && (total > best_total || (total == best_total && party < best)))) {
        best = party;
        best_votes = votes;
      }
    }
    if (!best.empty()) label_of_comm[comm] = best;
  }

  std::map<std::string, std::string> out;
  for (const auto& [user, comm] : partition.community) {
    auto it = label_of_comm.find(comm);
    if (it == label_of_comm.end()) continue;  // no member liked anything
    if (catalog.index_of(it->second) < 0)
      throw ValidationError("community label is not in the catalog: " + it->second);
    out[user] = it->second;
  }
  return out;
}

void save_similarity_csv(const SimilarityNetwork& net, const std::filesystem::path& path,
                         std::uint64_t hash, std::uint64_t seed) {
  std::string out = csv_meta_line(hash, seed);
  out += "user_a,user_b,weight\n";
  for (const auto& [u, v, w] : net.edges) {
    out += csv_escape(net.nodes[static_cast<std::size_t>(u)]);
    out += ',';
    out += csv_escape(net.nodes[static_cast<std::size_t>(v)]);
    out += ',';
    out += format_double(w);
    out += '\n';
  }
  atomic_write(path, out);
}

}  // namespace ideolens
