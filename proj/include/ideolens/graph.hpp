#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ideolens/corpus.hpp"

namespace ideolens {

// Weighted undirected user-user network; edge weight = number of co-liked
// pivot tweets. Nodes are every user that appears in the like graph, sorted.
struct SimilarityNetwork {
  std::vector<std::string> nodes;
  std::vector<std::tuple<int, int, double>> edges;  // (u, v, weight), u < v

  int index_of(const std::string& user) const;
};

SimilarityNetwork project_bipartite(const LikeGraph& likes);

struct Partition {
  std::map<std::string, int> community;  // user -> community id, contiguous from 0
  int n_communities = 0;
  double modularity = 0.0;
};

// Weighted-modularity Louvain with seeded node-order shuffles. Nodes with no
// edges end up as singleton communities.
Partition louvain(const SimilarityNetwork& net, double resolution, std::uint64_t seed);

// Plurality vote over a community's members: each member votes for the party
// whose pivot tweets it liked most (member-level ties break to the
// lexicographically smaller label); community ties break first by total like
// counts toward each candidate party, then lexicographically.
std::map<std::string, std::string> label_communities(const Partition& partition,
                                                     const LikeGraph& likes,
                                                     const PartyCatalog& catalog);

void save_similarity_csv(const SimilarityNetwork& net, const std::filesystem::path& path,
                         std::uint64_t config_hash, std::uint64_t seed);

}  // namespace ideolens
