#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "heco/rng.hpp"
#include "heco/tensor.hpp"

namespace heco {

using NodeId = std::int32_t;  // local id within a node type
using TypeId = std::int32_t;

// Dense row-major matrix for immutable graph data (features, embeddings).
struct DenseMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> v;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
    double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

struct RelationSpec {
    TypeId src_type = -1;
    TypeId dst_type = -1;
    std::vector<std::pair<NodeId, NodeId>> edges;  // (src local, dst local)
};

struct HeteroGraphData {
    std::vector<std::string> type_names;  // index = TypeId
    std::vector<NodeId> type_counts;      // nodes per type, local ids 0..count-1
    std::vector<RelationSpec> relations;
    std::vector<DenseMatrix> features;  // per type; empty matrix means none supplied
    TypeId target_type = -1;
};

// Immutable typed multigraph. Relation adjacencies are kept in both
// directions so meta-paths can traverse either way.
class HeteroGraph {
public:
    explicit HeteroGraph(HeteroGraphData data);

    std::size_t num_types() const { return data_.type_names.size(); }
    std::size_t num_relations() const { return data_.relations.size(); }
    TypeId target_type() const { return data_.target_type; }
    NodeId count(TypeId t) const { return data_.type_counts[t]; }
    NodeId target_count() const { return count(data_.target_type); }
    const std::string& type_name(TypeId t) const { return data_.type_names[t]; }
    TypeId type_by_name(const std::string& name) const;
    const DenseMatrix& features(TypeId t) const { return data_.features[t]; }
    const RelationSpec& relation(std::size_t r) const { return data_.relations[r]; }

    // Sorted unique forward/backward adjacency of a relation.
    const std::vector<std::vector<NodeId>>& adj_fwd(std::size_t rel) const { return fwd_[rel]; }
    const std::vector<std::vector<NodeId>>& adj_bwd(std::size_t rel) const { return bwd_[rel]; }

    // Union of neighbors of the given type over all relations touching the
    // target type, per target node; sorted unique.
    const std::vector<std::vector<NodeId>>& target_neighbors(TypeId nbr_type) const;

private:
    HeteroGraphData data_;
    std::vector<std::vector<std::vector<NodeId>>> fwd_, bwd_;
    std::vector<std::vector<std::vector<NodeId>>> target_nbrs_;  // per type
};

struct NetworkSchema {
    std::vector<TypeId> types;
    std::vector<std::tuple<TypeId, std::size_t, TypeId>> schema_edges;  // (src, relation, dst)
    std::vector<TypeId> neighbor_types_of_target;                      // Φ_1..Φ_S, ordered
};

NetworkSchema derive_schema(const HeteroGraph& g);

struct MetaPathStep {
    std::size_t relation = 0;
    bool forward = true;  // traverse src->dst when true
};

struct MetaPathSpec {
    std::string name;
    std::vector<MetaPathStep> chain;  // begins and ends at the target type
};

// Symmetric boolean adjacency among target nodes induced by a meta-path;
// self-pairs excluded. neighbors[i] is sorted.
struct MetaPathGraph {
    MetaPathSpec spec;
    std::vector<std::vector<NodeId>> neighbors;
    std::vector<NodeId> degrees;

    bool connected(NodeId i, NodeId j) const;
};

// Composes the chain's relation adjacencies as boolean sparse products.
// A pair (i,j) is adjacent iff some concrete instance of the chain connects
// the two nodes (in either orientation).
MetaPathGraph build_metapath_graph(const HeteroGraph& g, const MetaPathSpec& spec);

// Number of meta-paths whose neighborhoods contain the pair (i,j).
int count_metapath_links(const std::vector<MetaPathGraph>& mpgs, NodeId i, NodeId j);

struct PositiveSets {
    std::vector<std::vector<NodeId>> positives;  // ordered: count desc, id asc
    std::vector<std::vector<NodeId>> negatives;  // sorted
    int t_pos = 0;
};

// Ranks candidates by how many meta-paths connect them to each anchor and
// keeps the top t_pos; everything else (except the anchor itself) becomes
// a negative.
PositiveSets select_positives(const std::vector<MetaPathGraph>& mpgs, int t_pos);

// Uniform sample of t neighbors of the requested type: without replacement
// when the node has at least t of them, with replacement otherwise.
std::vector<NodeId> sample_neighbors(const HeteroGraph& g, NodeId i, TypeId nbr_type, int t,
                                     Rng& rng);

// Normalized propagation operator over a meta-path graph: diagonal
// 1/(d_i+1), off-diagonal 1/sqrt((d_i+1)(d_j+1)) for adjacent pairs.
SparseOp gcn_operator(const MetaPathGraph& mpg);

}  // namespace heco
