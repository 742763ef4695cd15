#pragma once

#include "heco/model.hpp"

namespace heco {

// Type-specific projection of raw attributes into the common space:
// dropout(act(X_t·W_tᵀ + b_t)) per type; dropout only in training mode.
std::vector<TensorPtr> project_features(const HeteroGraph& g, const HecoParams& p,
                                        const TrainConfig& cfg, bool training, Rng& rng);

// Node-level attention over a sampled neighbor multiset of one type.
// The anchor's own feature enters the attention logits only; its message
// is never aggregated. Duplicate samples attend independently.
TensorPtr encode_type_neighbors(const TensorPtr& h_target, const TensorPtr& h_nbr,
                                const std::vector<std::vector<NodeId>>& samples,
                                const TensorPtr& attn_vec, const TrainConfig& cfg, bool training,
                                Rng& rng);

struct FusedView {
    TensorPtr z;     // N×d
    TensorPtr beta;  // one weight per fused embedding, global across nodes
};

// Shared score-and-softmax fusion of per-type (or per-meta-path) embeddings.
FusedView attention_fuse(const std::vector<TensorPtr>& embeds, const TensorPtr& w,
                         const TensorPtr& b, const TensorPtr& a, double dropout_attn,
                         bool training, Rng& rng);

// Degree-normalized propagation over one meta-path graph; reads only
// target-type features.
TensorPtr propagate_metapath(const TensorPtr& h_target, const SparseOp& op);

struct SchemaViewOut {
    TensorPtr z;
    TensorPtr beta;
    std::vector<std::vector<std::vector<NodeId>>> samples;  // per neighbor type, per node
};

SchemaViewOut schema_view(const HeteroGraph& g, const NetworkSchema& schema,
                          const std::vector<TensorPtr>& projected, const HecoParams& p,
                          const std::map<TypeId, int>& sample_sizes, const TrainConfig& cfg,
                          bool training, Rng& rng);

struct MetapathViewOut {
    TensorPtr z;
    TensorPtr beta;
};

MetapathViewOut metapath_view(const TensorPtr& h_target, const std::vector<SparseOp>& ops,
                              const HecoParams& p, const TrainConfig& cfg, bool training,
                              Rng& rng);

}  // namespace heco
