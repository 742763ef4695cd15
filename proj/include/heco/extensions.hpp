#pragma once

#include "heco/contrast.hpp"

namespace heco {

// Convex mixtures of the k hardest negatives (highest anchor similarity).
// Indices and coefficients are logged so fixtures can replay the draw.
struct HardNegativeMix {
    std::vector<NodeId> src_a, src_b;
    std::vector<double> coeff;  // mixture = m·z_a + (1-m)·z_b, m ~ U(0,1)
};

// sims_row holds the anchor's cosine similarity to every candidate column;
// negatives lists the anchor's negative ids. Emits nothing when there are
// no negatives.
HardNegativeMix mix_hard_negatives(const std::vector<double>& sims_row,
                                   const std::vector<NodeId>& negatives, int k, Rng& rng);

std::vector<std::vector<double>> mixed_vectors(const DenseMatrix& source, const HardNegativeMix& mix);

// Row-wise bilinear discriminator: sigmoid(anchor·M·candidateᵀ) per row pair.
TensorPtr discriminate(const TensorPtr& anchors, const TensorPtr& candidates, const TensorPtr& m);

// One fake per anchor row: ELU(W·(anchor·M + σ·ξ) + b); ξ rows supplied by
// the caller, so the op is deterministic given its inputs.
TensorPtr generate_fake(const TensorPtr& anchors, const TensorPtr& m_gen, const TensorPtr& w,
                        const TensorPtr& b, const TensorPtr& noise, double sigma2);

struct GanLoss {
    TensorPtr total;
    TensorPtr sc_part, mp_part;  // batch means of the per-view terms
};

// Discriminator objective: positives from the opposite view score high,
// generator fakes score low; fakes are treated as constants here.
GanLoss discriminator_loss(const TensorPtr& z_sc, const TensorPtr& z_mp,
                           const std::vector<NodeId>& batch,
                           const std::vector<std::vector<NodeId>>& pos_subsets,
                           const GanParams& gp, const TensorPtr& noise_mp,
                           const TensorPtr& noise_sc, double sigma2);

// Generator objective against a frozen discriminator.
GanLoss generator_loss(const TensorPtr& z_sc, const TensorPtr& z_mp,
                       const std::vector<NodeId>& batch, int fakes_per_anchor,
                       const GanParams& gp, const TensorPtr& noise_mp, const TensorPtr& noise_sc,
                       double sigma2);

// Warm-up, alternated D/G training, then boosted contrastive epochs with
// generated negatives appended to every anchor's pool; repeats until the
// early-stopping rule fires during a boost phase or max_epochs is reached.
TrainResult train_heco_gan(HecoTrainer& trainer);

// Dispatch on cfg.extension over a prepared trainer.
TrainResult run_trainer(HecoTrainer& trainer);

// Builds meta-path graphs and positive sets from a dataset and trains.
struct TrainingRun {
    TrainResult result;
    std::unique_ptr<HecoTrainer> trainer;  // keeps the trained store alive
};
TrainingRun run_training(const LoadedDataset& data, const TrainConfig& cfg);

}  // namespace heco
