#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "heco/graph.hpp"

namespace heco {

struct LoadedDataset {
    HeteroGraph graph;
    std::vector<int> labels;  // per target node
    std::vector<MetaPathSpec> metapaths;
};

// Reads a dataset directory described by its manifest file. Node types are
// single letters; types without a feature file get one-hot id features.
LoadedDataset load_dataset(const std::string& dir);

// Writes a dataset in the same layout load_dataset reads. Only the target
// type's features are materialized unless write_all_features is set.
void write_dataset(const std::string& dir, const HeteroGraph& g, const std::vector<int>& labels,
                   const std::vector<MetaPathSpec>& metapaths, bool write_all_features = false);

struct SynthSpec {
    int classes = 3;
    int nodes_per_class = 40;
    std::vector<int> cardinalities{30, 150};  // nodes per neighbor type
    double intra = 0.8;   // same-class edge probability
    double cross = 0.05;  // cross-class edge probability
    int feat_dim = 32;
    double noise = 0.5;  // target feature noise scale
    std::uint64_t seed = 1;
};

// Planted-class HIN: target nodes split into classes, each class owning a
// share of every neighbor type's pool; one target-X-target meta-path per
// neighbor type X. Pure function of the spec.
LoadedDataset generate_synthetic(const SynthSpec& spec);

struct EmbeddingMatrix {
    DenseMatrix m;
    std::string view = "mp";
    int epoch = 0;
    std::string config_hash;
};

void save_embeddings(const std::string& path, const EmbeddingMatrix& emb);
EmbeddingMatrix load_embeddings(const std::string& path);

struct Split {
    std::vector<NodeId> train, val, test;
    int labels_per_class = 0;
};

void save_split(const std::string& path, const Split& split);
Split load_split(const std::string& path);

}  // namespace heco
