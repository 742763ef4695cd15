#pragma once

#include "heco/dataio.hpp"
#include "heco/encoders.hpp"

namespace heco {

// Shared one-hidden-layer head mapping both views into the contrast space.
TensorPtr project(const TensorPtr& z, const HecoParams& p);

// Index lists the loss works on. The anchor's own other-view embedding is
// always the first positive; denominators cover every target node.
struct LossSets {
    std::vector<std::vector<int>> pos;
    std::vector<std::vector<int>> all;
};
LossSets loss_sets(const PositiveSets& sets);

struct ContrastLoss {
    TensorPtr per_node;
    TensorPtr mean;
};

// Multi-positive InfoNCE over cosine similarities between anchor rows and
// candidate rows. extra_lse, when given, holds per-anchor log-sum-exp of
// additional negative similarities (already divided by tau) that join the
// denominator only.
ContrastLoss contrastive_loss_lists(const TensorPtr& sims, double tau,
                                    const std::vector<std::vector<int>>& pos,
                                    const std::vector<std::vector<int>>& all,
                                    const TensorPtr& extra_lse = nullptr);

// Anchor embeddings from one view scored against candidates from the other.
ContrastLoss contrastive_loss(const TensorPtr& anchor_proj, const TensorPtr& other_proj,
                              const PositiveSets& sets, double tau);

// (1/|V|) Σ_i λ·L_sc[i] + (1-λ)·L_mp[i]
TensorPtr total_loss(const TensorPtr& l_sc_per_node, const TensorPtr& l_mp_per_node, double lambda);

struct EpochStats {
    int epoch = 0;
    std::string phase = "train";
    double j = 0.0, l_sc = 0.0, l_mp = 0.0;
    std::vector<double> beta_sc, beta_mp;
};

struct TrainResult {
    EmbeddingMatrix embeddings;     // z^mp at the best-loss epoch, dropout off
    EmbeddingMatrix embeddings_sc;  // z^sc companion
    std::vector<EpochStats> trace;
    std::vector<std::string> beta_sc_labels, beta_mp_labels;
    std::vector<double> final_beta_sc, final_beta_mp;
    int best_epoch = 0;
    double best_j = 0.0;
};

// Generator outputs grouped per anchor; rows live in the raw embedding
// space of the named view and are projected by the live head before they
// enter the denominators.
struct FakeNegatives {
    int per_anchor = 0;
    DenseMatrix mp;  // joins the schema-anchored direction
    DenseMatrix sc;  // joins the meta-path-anchored direction
};

struct ViewEmbeddings {
    DenseMatrix z_sc, z_mp;
};

class HecoTrainer {
public:
    HecoTrainer(const HeteroGraph& g, std::vector<MetaPathGraph> mpgs, PositiveSets positives,
                TrainConfig cfg);

    // Full training loop for extension none/mu: per-epoch resample, forward
    // both views, both loss directions, backward, adaptive step, early stop.
    TrainResult run();

    // Single optimization epoch; counts toward max_epochs.
    EpochStats train_epoch(const FakeNegatives* fakes, const std::string& phase);
    // Updates best-loss bookkeeping; true once patience is exhausted.
    bool observe(const EpochStats& st);
    bool reached_max_epochs() const { return epoch_ >= cfg_.max_epochs; }
    void append_stats(const EpochStats& st) { trace_.push_back(st); }
    TrainResult finalize();

    // Dropout-off forward with a fresh fixed-seed sample.
    ViewEmbeddings eval_embeddings();
    // Dropout-off objective with caller-owned rng; used by gradient checks.
    TensorPtr objective(Rng& rng, const FakeNegatives* fakes = nullptr);

    ParamStore& store() { return store_; }
    const TrainConfig& config() const { return cfg_; }
    const HecoParams& params() const { return params_; }
    Rng& rng() { return rng_; }
    int epochs_run() const { return epoch_; }
    NodeId target_count() const { return g_.target_count(); }
    const PositiveSets& positives() const { return positives_; }
    const HeteroGraph& graph() const { return g_; }

private:
    struct Forward {
        TensorPtr z_sc, z_mp, proj_sc, proj_mp, beta_sc, beta_mp;
        TensorPtr l_sc, l_mp, j;
    };
    Forward forward(bool training, Rng& rng, const FakeNegatives* fakes, bool with_loss);
    TensorPtr extras_lse(const TensorPtr& anchor_proj, const TensorPtr& extra_rows,
                         const std::vector<std::size_t>& anchor_of_row,
                         const std::vector<std::size_t>& offsets) const;
    TensorPtr mu_extras(const TensorPtr& sims, const TensorPtr& anchor_proj,
                        const TensorPtr& other_proj, Rng& rng);

    const HeteroGraph& g_;
    std::vector<MetaPathGraph> mpgs_;
    PositiveSets positives_;
    TrainConfig cfg_;
    NetworkSchema schema_;
    std::map<TypeId, int> sample_sizes_;
    std::vector<SparseOp> ops_;
    ParamStore store_;
    HecoParams params_;
    Rng rng_;
    LossSets sets_;
    std::vector<EpochStats> trace_;
    int epoch_ = 0;
    int best_epoch_ = 0;
    double best_j_ = 0.0;
    bool has_best_ = false;
    int since_best_ = 0;
    std::map<std::string, std::vector<double>> best_values_;
};

void write_loss_trace(const std::string& path, const TrainResult& r, bool with_phase);
void write_attention_trace(const std::string& path, const TrainResult& r);

}  // namespace heco
