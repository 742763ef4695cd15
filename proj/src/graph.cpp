#include "heco/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "heco/errors.hpp"

namespace heco {

HeteroGraph::HeteroGraph(HeteroGraphData data) : data_(std::move(data)) {
    const std::size_t ntypes = data_.type_names.size();
    if (data_.type_counts.size() != ntypes) throw DataError("type count table size mismatch");
    if (data_.target_type < 0 || static_cast<std::size_t>(data_.target_type) >= ntypes)
        throw DataError("target type out of range");
    if (ntypes + data_.relations.size() <= 2)
        throw DataError("not heterogeneous: need |node types| + |relation types| > 2");

    if (data_.features.size() != ntypes) data_.features.resize(ntypes);
    for (std::size_t t = 0; t < ntypes; ++t) {
        auto& f = data_.features[t];
        if (f.rows == 0 && f.cols == 0) {
            // one-hot identity for types without supplied attributes
            const auto n = static_cast<std::size_t>(data_.type_counts[t]);
            f = DenseMatrix(n, n);
            for (std::size_t i = 0; i < n; ++i) f.at(i, i) = 1.0;
        }
        if (f.rows != static_cast<std::size_t>(data_.type_counts[t]))
            throw DataError("feature row count for type " + data_.type_names[t] + " is " +
                            std::to_string(f.rows) + ", expected " +
                            std::to_string(data_.type_counts[t]));
    }

    fwd_.resize(data_.relations.size());
    bwd_.resize(data_.relations.size());
    for (std::size_t r = 0; r < data_.relations.size(); ++r) {
        const auto& rel = data_.relations[r];
        if (rel.src_type < 0 || static_cast<std::size_t>(rel.src_type) >= ntypes ||
            rel.dst_type < 0 || static_cast<std::size_t>(rel.dst_type) >= ntypes)
            throw DataError("relation " + std::to_string(r) + " references unknown type");
        fwd_[r].resize(data_.type_counts[rel.src_type]);
        bwd_[r].resize(data_.type_counts[rel.dst_type]);
        for (const auto& [s, d] : rel.edges) {
            if (s < 0 || s >= data_.type_counts[rel.src_type] || d < 0 ||
                d >= data_.type_counts[rel.dst_type])
                throw DataError("edge (" + std::to_string(s) + "," + std::to_string(d) +
                                ") of relation " + std::to_string(r) +
                                " does not match its endpoint types");
            fwd_[r][s].push_back(d);
            bwd_[r][d].push_back(s);
        }
        for (auto& l : fwd_[r]) {
            std::sort(l.begin(), l.end());
            l.erase(std::unique(l.begin(), l.end()), l.end());
        }
        for (auto& l : bwd_[r]) {
            std::sort(l.begin(), l.end());
            l.erase(std::unique(l.begin(), l.end()), l.end());
        }
    }

    // per-type neighborhoods of target nodes across all relations
    target_nbrs_.resize(ntypes);
    for (auto& per_type : target_nbrs_) per_type.resize(data_.type_counts[data_.target_type]);
    for (std::size_t r = 0; r < data_.relations.size(); ++r) {
        const auto& rel = data_.relations[r];
        if (rel.src_type == data_.target_type) {
            for (NodeId i = 0; i < data_.type_counts[data_.target_type]; ++i)
                for (NodeId j : fwd_[r][i]) target_nbrs_[rel.dst_type][i].push_back(j);
        }
        if (rel.dst_type == data_.target_type) {
            for (NodeId i = 0; i < data_.type_counts[data_.target_type]; ++i)
                for (NodeId j : bwd_[r][i]) target_nbrs_[rel.src_type][i].push_back(j);
        }
    }
    for (auto& per_type : target_nbrs_)
        for (auto& l : per_type) {
            std::sort(l.begin(), l.end());
            l.erase(std::unique(l.begin(), l.end()), l.end());
        }
}

TypeId HeteroGraph::type_by_name(const std::string& name) const {
    for (std::size_t t = 0; t < data_.type_names.size(); ++t)
        if (data_.type_names[t] == name) return static_cast<TypeId>(t);
    throw DataError("unknown node type: " + name);
}

const std::vector<std::vector<NodeId>>& HeteroGraph::target_neighbors(TypeId nbr_type) const {
    if (nbr_type < 0 || static_cast<std::size_t>(nbr_type) >= target_nbrs_.size())
        throw DataError("neighbor type out of range");
    return target_nbrs_[nbr_type];
}

NetworkSchema derive_schema(const HeteroGraph& g) {
    NetworkSchema schema;
    for (std::size_t t = 0; t < g.num_types(); ++t) schema.types.push_back(static_cast<TypeId>(t));
    std::set<TypeId> nbr_types;
    for (std::size_t r = 0; r < g.num_relations(); ++r) {
        const auto& rel = g.relation(r);
        schema.schema_edges.emplace_back(rel.src_type, r, rel.dst_type);
        if (rel.src_type == g.target_type() && rel.dst_type != g.target_type())
            nbr_types.insert(rel.dst_type);
        if (rel.dst_type == g.target_type() && rel.src_type != g.target_type())
            nbr_types.insert(rel.src_type);
    }
    schema.neighbor_types_of_target.assign(nbr_types.begin(), nbr_types.end());
    if (schema.neighbor_types_of_target.empty())
        throw DataError("target type has no neighbor types in the schema");
    return schema;
}

bool MetaPathGraph::connected(NodeId i, NodeId j) const {
    const auto& l = neighbors[i];
    return std::binary_search(l.begin(), l.end(), j);
}

MetaPathGraph build_metapath_graph(const HeteroGraph& g, const MetaPathSpec& spec) {
    if (spec.chain.size() < 2) throw DataError("meta-path '" + spec.name + "' shorter than 2 relations");
    // type-check the chain
    TypeId cur = g.target_type();
    for (const auto& step : spec.chain) {
        if (step.relation >= g.num_relations())
            throw DataError("meta-path '" + spec.name + "' uses unknown relation id " +
                            std::to_string(step.relation));
        const auto& rel = g.relation(step.relation);
        const TypeId from = step.forward ? rel.src_type : rel.dst_type;
        const TypeId to = step.forward ? rel.dst_type : rel.src_type;
        if (from != cur)
            throw DataError("meta-path '" + spec.name + "': step expects type " + g.type_name(from) +
                            " but chain is at " + g.type_name(cur));
        cur = to;
    }
    if (cur != g.target_type())
        throw DataError("meta-path '" + spec.name + "' does not end at the target type");

    const NodeId n = g.target_count();
    MetaPathGraph mpg;
    mpg.spec = spec;
    mpg.neighbors.resize(n);

    // boolean product, row by row: expand each node's frontier along the chain
    for (NodeId i = 0; i < n; ++i) {
        std::vector<NodeId> frontier{i};
        for (const auto& step : spec.chain) {
            const auto& adj = step.forward ? g.adj_fwd(step.relation) : g.adj_bwd(step.relation);
            std::vector<NodeId> next;
            for (NodeId u : frontier)
                next.insert(next.end(), adj[u].begin(), adj[u].end());
            std::sort(next.begin(), next.end());
            next.erase(std::unique(next.begin(), next.end()), next.end());
            frontier = std::move(next);
            if (frontier.empty()) break;
        }
        auto& out = mpg.neighbors[i];
        for (NodeId j : frontier)
            if (j != i) out.push_back(j);
    }

    // a path instance connecting the pair in either orientation makes it adjacent
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j : mpg.neighbors[i])
            mpg.neighbors[j].push_back(i);
    for (auto& l : mpg.neighbors) {
        std::sort(l.begin(), l.end());
        l.erase(std::unique(l.begin(), l.end()), l.end());
    }

    mpg.degrees.resize(n);
    for (NodeId i = 0; i < n; ++i) mpg.degrees[i] = static_cast<NodeId>(mpg.neighbors[i].size());
    return mpg;
}

int count_metapath_links(const std::vector<MetaPathGraph>& mpgs, NodeId i, NodeId j) {
    if (mpgs.empty()) throw DataError("no meta-path graphs given");
    const NodeId n = static_cast<NodeId>(mpgs[0].neighbors.size());
    if (i < 0 || i >= n || j < 0 || j >= n)
        throw DataError("count_metapath_links: node id out of target range");
    if (i == j) throw DataError("count_metapath_links: i and j must differ");
    int c = 0;
    for (const auto& mpg : mpgs)
        if (mpg.connected(i, j)) ++c;
    return c;
}

PositiveSets select_positives(const std::vector<MetaPathGraph>& mpgs, int t_pos) {
    if (t_pos < 1) throw ConfigError("t_pos must be >= 1");
    if (mpgs.empty()) throw DataError("no meta-path graphs given");
    const NodeId n = static_cast<NodeId>(mpgs[0].neighbors.size());

    PositiveSets out;
    out.t_pos = t_pos;
    out.positives.resize(n);
    out.negatives.resize(n);

    std::vector<int> counts(static_cast<std::size_t>(n));
    for (NodeId i = 0; i < n; ++i) {
        std::fill(counts.begin(), counts.end(), 0);
        for (const auto& mpg : mpgs)
            for (NodeId j : mpg.neighbors[i]) ++counts[j];

        std::vector<NodeId> candidates;
        for (NodeId j = 0; j < n; ++j)
            if (j != i && counts[j] > 0) candidates.push_back(j);
        std::sort(candidates.begin(), candidates.end(), [&](NodeId a, NodeId b) {
            if (counts[a] != counts[b]) return counts[a] > counts[b];
            return a < b;
        });

        const std::size_t keep = std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(t_pos));
        out.positives[i].assign(candidates.begin(), candidates.begin() + keep);

        std::vector<char> is_pos(static_cast<std::size_t>(n), 0);
        for (NodeId j : out.positives[i]) is_pos[j] = 1;
        for (NodeId j = 0; j < n; ++j)
            if (j != i && !is_pos[j]) out.negatives[i].push_back(j);
    }
    return out;
}

std::vector<NodeId> sample_neighbors(const HeteroGraph& g, NodeId i, TypeId nbr_type, int t,
                                     Rng& rng) {
    if (t < 1) throw ConfigError("sample size must be >= 1");
    const auto& nbrs = g.target_neighbors(nbr_type)[i];
    if (nbrs.empty())
        throw DataError("node " + std::to_string(i) + " has no neighbors of type " +
                        g.type_name(nbr_type));
    std::vector<NodeId> out;
    out.reserve(static_cast<std::size_t>(t));
    if (nbrs.size() >= static_cast<std::size_t>(t)) {
        for (std::size_t p : rng.sample_without_replacement(nbrs.size(), static_cast<std::size_t>(t)))
            out.push_back(nbrs[p]);
    } else {
        for (int k = 0; k < t; ++k) out.push_back(nbrs[rng.index(nbrs.size())]);
    }
    return out;
}

SparseOp gcn_operator(const MetaPathGraph& mpg) {
    const std::size_t n = mpg.neighbors.size();
    SparseOp s;
    s.n = n;
    s.row_ptr.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (mpg.degrees[i] != static_cast<NodeId>(mpg.neighbors[i].size()))
            throw DataError("meta-path degrees inconsistent with adjacency");
        s.row_ptr[i + 1] = s.row_ptr[i] + mpg.neighbors[i].size() + 1;
    }
    s.col.reserve(s.row_ptr[n]);
    s.w.reserve(s.row_ptr[n]);
    for (std::size_t i = 0; i < n; ++i) {
        const double di = static_cast<double>(mpg.degrees[i]) + 1.0;
        s.col.push_back(i);
        s.w.push_back(1.0 / di);
        for (NodeId j : mpg.neighbors[i]) {
            const double dj = static_cast<double>(mpg.degrees[j]) + 1.0;
            s.col.push_back(static_cast<std::size_t>(j));
            s.w.push_back(1.0 / std::sqrt(di * dj));
        }
    }
    return s;
}

}  // namespace heco
