#include "heco/encoders.hpp"

#include "heco/errors.hpp"

namespace heco {

TensorPtr apply_activation(const TensorPtr& x, Activation act) {
    switch (act) {
        case Activation::Elu: return elu(x);
        case Activation::Relu: return leaky_relu(x, 0.0);
        case Activation::Tanh: return t_tanh(x);
    }
    throw ConfigError("unknown activation");
}

void TrainConfig::validate() const {
    if (dim < 1) throw ConfigError("embedding dimension must be >= 1");
    if (tau <= 0.0) throw ConfigError("temperature must be > 0");
    if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda must be in [0,1]");
    if (t_pos < 1) throw ConfigError("t_pos must be >= 1");
    if (lr <= 0.0) throw ConfigError("learning rate must be > 0");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (dropout_feat < 0.0 || dropout_feat >= 1.0) throw ConfigError("dropout_feat must be in [0,1)");
    if (dropout_attn < 0.0 || dropout_attn >= 1.0) throw ConfigError("dropout_attn must be in [0,1)");
    if (sample_default < 1) throw ConfigError("sample_default must be >= 1");
    for (const auto& [letter, t] : sample_overrides)
        if (t < 1) throw ConfigError("sample threshold for type " + letter + " must be >= 1");
    if (mu.k < 1) throw ConfigError("mu_k must be >= 1");
    if (gan.sigma2 < 0.0) throw ConfigError("gan_sigma2 must be >= 0");
    if (gan.k0 < 1 || gan.k_d < 1 || gan.k_g < 1 || gan.i_dg < 1 || gan.k_h < 1)
        throw ConfigError("gan schedule counts must be >= 1");
    if (gan.pi_size < 1) throw ConfigError("gan_pi must be >= 1");
    if (gan.batch < 0) throw ConfigError("gan_batch must be >= 0");
}

namespace {

TensorPtr glorot_vector(std::size_t len, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(1 + len));
    std::vector<double> v(len);
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return make_vector(std::move(v), true);
}

TensorPtr zero_vector(std::size_t len) {
    return make_vector(std::vector<double>(len, 0.0), true);
}

}  // namespace

HecoParams init_heco_params(const HeteroGraph& g, const NetworkSchema& schema,
                            const TrainConfig& cfg, ParamStore& store, Rng& rng) {
    HecoParams p;
    const std::size_t d = cfg.dim;
    for (std::size_t t = 0; t < g.num_types(); ++t) {
        const TypeId tid = static_cast<TypeId>(t);
        const std::string& letter = g.type_name(tid);
        p.proj_w[tid] = store.add("heco.proj.W." + letter,
                                  glorot_init(d, g.features(tid).cols, rng));
        p.proj_b[tid] = store.add("heco.proj.b." + letter, zero_vector(d));
    }
    for (TypeId t : schema.neighbor_types_of_target)
        p.node_attn[t] = store.add("heco.sc.attn." + g.type_name(t), glorot_vector(2 * d, rng));
    p.sc_w = store.add("heco.sc.W", glorot_init(d, d, rng));
    p.sc_b = store.add("heco.sc.b", zero_vector(d));
    p.sc_a = store.add("heco.sc.a", glorot_vector(d, rng));
    p.mp_w = store.add("heco.mp.W", glorot_init(d, d, rng));
    p.mp_b = store.add("heco.mp.b", zero_vector(d));
    p.mp_a = store.add("heco.mp.a", glorot_vector(d, rng));
    p.head_w1 = store.add("heco.head.W1", glorot_init(d, d, rng));
    p.head_b1 = store.add("heco.head.b1", zero_vector(d));
    p.head_w2 = store.add("heco.head.W2", glorot_init(d, d, rng));
    p.head_b2 = store.add("heco.head.b2", zero_vector(d));
    if (cfg.extension == Extension::Gan) {
        p.gan.m_disc_mp = store.add("disc.M_mp", glorot_init(d, d, rng));
        p.gan.m_disc_sc = store.add("disc.M_sc", glorot_init(d, d, rng));
        p.gan.m_gen_mp = store.add("gen.M_mp", glorot_init(d, d, rng));
        p.gan.m_gen_sc = store.add("gen.M_sc", glorot_init(d, d, rng));
        p.gan.w = store.add("gen.W", glorot_init(d, d, rng));
        p.gan.b = store.add("gen.b", zero_vector(d));
    }
    return p;
}

std::map<TypeId, int> resolve_sample_sizes(const HeteroGraph& g, const NetworkSchema& schema,
                                           const TrainConfig& cfg) {
    std::map<std::string, int> unused = cfg.sample_overrides;
    std::map<TypeId, int> out;
    for (TypeId t : schema.neighbor_types_of_target) {
        auto it = cfg.sample_overrides.find(g.type_name(t));
        out[t] = it == cfg.sample_overrides.end() ? cfg.sample_default : it->second;
        unused.erase(g.type_name(t));
    }
    if (!unused.empty())
        throw ConfigError("sample threshold for '" + unused.begin()->first +
                          "' does not match any neighbor type of the target");
    return out;
}

std::vector<TensorPtr> project_features(const HeteroGraph& g, const HecoParams& p,
                                        const TrainConfig& cfg, bool training, Rng& rng) {
    std::vector<TensorPtr> out(g.num_types());
    for (std::size_t t = 0; t < g.num_types(); ++t) {
        const TypeId tid = static_cast<TypeId>(t);
        auto w_it = p.proj_w.find(tid);
        auto b_it = p.proj_b.find(tid);
        if (w_it == p.proj_w.end() || b_it == p.proj_b.end())
            throw ConfigError("no projection registered for type " + g.type_name(tid));
        const auto& f = g.features(tid);
        auto x = make_matrix(f.rows, f.cols, f.v);
        auto h = apply_activation(linear(x, w_it->second, b_it->second), cfg.activation);
        out[t] = dropout(h, cfg.dropout_feat, rng, training);
    }
    return out;
}

TensorPtr encode_type_neighbors(const TensorPtr& h_target, const TensorPtr& h_nbr,
                                const std::vector<std::vector<NodeId>>& samples,
                                const TensorPtr& attn_vec, const TrainConfig& cfg, bool training,
                                Rng& rng) {
    const std::size_t n = samples.size();
    std::vector<std::size_t> anchor_idx, nbr_idx, offsets{0};
    for (std::size_t i = 0; i < n; ++i) {
        if (samples[i].empty()) throw DataError("empty neighbor sample for node " + std::to_string(i));
        for (NodeId j : samples[i]) {
            anchor_idx.push_back(i);
            nbr_idx.push_back(static_cast<std::size_t>(j));
        }
        offsets.push_back(anchor_idx.size());
    }
    auto anchor_rows = gather_rows(h_target, anchor_idx);
    auto nbr_rows = gather_rows(h_nbr, nbr_idx);
    auto logits = leaky_relu(matvec(concat_cols(anchor_rows, nbr_rows), attn_vec), cfg.leaky_slope);
    auto alpha = softmax_groups(logits, offsets);
    alpha = dropout(alpha, cfg.dropout_attn, rng, training);
    return apply_activation(segment_weighted_sum(alpha, nbr_rows, offsets), cfg.activation);
}

FusedView attention_fuse(const std::vector<TensorPtr>& embeds, const TensorPtr& w,
                         const TensorPtr& b, const TensorPtr& a, double dropout_attn,
                         bool training, Rng& rng) {
    if (embeds.empty()) throw TensorError("attention_fuse: nothing to fuse");
    // one dropout draw on the attention vector, shared by all scores
    auto attn = dropout(a, dropout_attn, rng, training);
    std::vector<TensorPtr> scores;
    for (const auto& h : embeds)
        scores.push_back(mean_all(matvec(t_tanh(linear(h, w, b)), attn)));
    FusedView out;
    out.beta = softmax_vec(stack_scalars(scores));
    out.z = scalar_mix(out.beta, embeds);
    return out;
}

TensorPtr propagate_metapath(const TensorPtr& h_target, const SparseOp& op) {
    return spmm(op, h_target);
}

SchemaViewOut schema_view(const HeteroGraph& g, const NetworkSchema& schema,
                          const std::vector<TensorPtr>& projected, const HecoParams& p,
                          const std::map<TypeId, int>& sample_sizes, const TrainConfig& cfg,
                          bool training, Rng& rng) {
    const NodeId n = g.target_count();
    SchemaViewOut out;
    std::vector<TensorPtr> type_embeds;
    for (TypeId t : schema.neighbor_types_of_target) {
        const int threshold = sample_sizes.at(t);
        std::vector<std::vector<NodeId>> samples(static_cast<std::size_t>(n));
        for (NodeId i = 0; i < n; ++i) samples[i] = sample_neighbors(g, i, t, threshold, rng);
        type_embeds.push_back(encode_type_neighbors(projected[g.target_type()], projected[t],
                                                    samples, p.node_attn.at(t), cfg, training, rng));
        out.samples.push_back(std::move(samples));
    }
    auto fused = attention_fuse(type_embeds, p.sc_w, p.sc_b, p.sc_a, cfg.dropout_attn, training, rng);
    out.z = fused.z;
    out.beta = fused.beta;
    return out;
}

MetapathViewOut metapath_view(const TensorPtr& h_target, const std::vector<SparseOp>& ops,
                              const HecoParams& p, const TrainConfig& cfg, bool training,
                              Rng& rng) {
    if (ops.empty()) throw DataError("need at least one meta-path");
    std::vector<TensorPtr> path_embeds;
    for (const auto& op : ops) path_embeds.push_back(propagate_metapath(h_target, op));
    auto fused = attention_fuse(path_embeds, p.mp_w, p.mp_b, p.mp_a, cfg.dropout_attn, training, rng);
    return MetapathViewOut{fused.z, fused.beta};
}

}  // namespace heco
