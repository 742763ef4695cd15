#include "heco/extensions.hpp"

#include <algorithm>
#include <cmath>

#include "heco/errors.hpp"

namespace heco {

namespace {

constexpr double kLogFloor = 1e-12;

TensorPtr ones_like(const TensorPtr& x) {
    return make_tensor(x->shape, std::vector<double>(x->numel(), 1.0));
}

TensorPtr draw_noise(std::size_t rows, std::size_t cols, Rng& rng) {
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = rng.normal();
    return make_matrix(rows, cols, std::move(v));
}

}  // namespace

HardNegativeMix mix_hard_negatives(const std::vector<double>& sims_row,
                                   const std::vector<NodeId>& negatives, int k, Rng& rng) {
    if (k < 1) throw ConfigError("mix count must be >= 1");
    HardNegativeMix out;
    if (negatives.empty()) return out;
    for (NodeId j : negatives)
        if (j < 0 || static_cast<std::size_t>(j) >= sims_row.size())
            throw DataError("negative id outside the similarity row");

    std::vector<NodeId> hard = negatives;
    std::sort(hard.begin(), hard.end(), [&](NodeId a, NodeId b) {
        if (sims_row[a] != sims_row[b]) return sims_row[a] > sims_row[b];
        return a < b;
    });
    hard.resize(std::min(hard.size(), static_cast<std::size_t>(k)));

    for (int r = 0; r < k; ++r) {
        const std::size_t ia = rng.index(hard.size());
        std::size_t ib = ia;
        if (hard.size() >= 2) {
            ib = rng.index(hard.size() - 1);
            if (ib >= ia) ++ib;
        }
        out.src_a.push_back(hard[ia]);
        out.src_b.push_back(hard[ib]);
        out.coeff.push_back(rng.uniform());
    }
    return out;
}

std::vector<std::vector<double>> mixed_vectors(const DenseMatrix& source, const HardNegativeMix& mix) {
    std::vector<std::vector<double>> out;
    for (std::size_t r = 0; r < mix.coeff.size(); ++r) {
        std::vector<double> v(source.cols);
        const double m = mix.coeff[r];
        for (std::size_t c = 0; c < source.cols; ++c)
            v[c] = m * source.at(mix.src_a[r], c) + (1.0 - m) * source.at(mix.src_b[r], c);
        out.push_back(std::move(v));
    }
    return out;
}

TensorPtr discriminate(const TensorPtr& anchors, const TensorPtr& candidates, const TensorPtr& m) {
    return t_sigmoid(rowwise_dot(matmul(anchors, m), candidates));
}

TensorPtr generate_fake(const TensorPtr& anchors, const TensorPtr& m_gen, const TensorPtr& w,
                        const TensorPtr& b, const TensorPtr& noise, double sigma2) {
    if (sigma2 < 0.0) throw ConfigError("noise scale must be >= 0");
    auto e = matmul(anchors, m_gen);
    if (sigma2 > 0.0) e = add(e, scale(noise, std::sqrt(sigma2)));
    return elu(linear(e, w, b));
}

namespace {

struct PairLists {
    std::vector<std::size_t> anchor_flat, cand_flat;
    std::vector<std::size_t> offsets{0};
};

PairLists flatten_pairs(const std::vector<NodeId>& batch,
                        const std::vector<std::vector<NodeId>>& per_anchor) {
    PairLists p;
    for (std::size_t bi = 0; bi < batch.size(); ++bi) {
        if (per_anchor[bi].empty()) throw DataError("empty positive subset for a batch anchor");
        for (NodeId j : per_anchor[bi]) {
            p.anchor_flat.push_back(static_cast<std::size_t>(batch[bi]));
            p.cand_flat.push_back(static_cast<std::size_t>(j));
        }
        p.offsets.push_back(p.anchor_flat.size());
    }
    return p;
}

// -E log D on positives and -E log(1-D) on fakes, per batch anchor.
TensorPtr disc_side(const TensorPtr& z_anchor, const TensorPtr& z_other, const PairLists& pairs,
                    const TensorPtr& m_disc, const TensorPtr& m_gen, const GanParams& gp,
                    const TensorPtr& noise, double sigma2) {
    auto anchors = gather_rows(z_anchor, pairs.anchor_flat);
    auto d_pos = discriminate(anchors, gather_rows(z_other, pairs.cand_flat), m_disc);
    auto pos_term = segment_mean(t_log(clamp_min(d_pos, kLogFloor)), pairs.offsets);
    auto fakes = detach(generate_fake(anchors, m_gen, gp.w, gp.b, noise, sigma2));
    auto d_fake = discriminate(anchors, fakes, m_disc);
    auto fake_term =
        segment_mean(t_log(clamp_min(sub(ones_like(d_fake), d_fake), kLogFloor)), pairs.offsets);
    return scale(add(pos_term, fake_term), -1.0);
}

}  // namespace

GanLoss discriminator_loss(const TensorPtr& z_sc, const TensorPtr& z_mp,
                           const std::vector<NodeId>& batch,
                           const std::vector<std::vector<NodeId>>& pos_subsets,
                           const GanParams& gp, const TensorPtr& noise_mp,
                           const TensorPtr& noise_sc, double sigma2) {
    if (batch.size() != pos_subsets.size())
        throw DataError("one positive subset per batch anchor required");
    auto pairs = flatten_pairs(batch, pos_subsets);
    auto l_sc = disc_side(z_sc, z_mp, pairs, gp.m_disc_mp, gp.m_gen_mp, gp, noise_mp, sigma2);
    auto l_mp = disc_side(z_mp, z_sc, pairs, gp.m_disc_sc, gp.m_gen_sc, gp, noise_sc, sigma2);
    GanLoss out;
    out.sc_part = mean_all(l_sc);
    out.mp_part = mean_all(l_mp);
    out.total = scale(add(out.sc_part, out.mp_part), 0.5);
    return out;
}

GanLoss generator_loss(const TensorPtr& z_sc, const TensorPtr& z_mp,
                       const std::vector<NodeId>& batch, int fakes_per_anchor,
                       const GanParams& gp, const TensorPtr& noise_mp, const TensorPtr& noise_sc,
                       double sigma2) {
    if (fakes_per_anchor < 1) throw ConfigError("fakes per anchor must be >= 1");
    std::vector<std::size_t> anchor_flat, offsets{0};
    for (NodeId i : batch) {
        for (int r = 0; r < fakes_per_anchor; ++r)
            anchor_flat.push_back(static_cast<std::size_t>(i));
        offsets.push_back(anchor_flat.size());
    }
    auto side = [&](const TensorPtr& z_anchor, const TensorPtr& m_disc, const TensorPtr& m_gen,
                    const TensorPtr& noise) {
        auto anchors = gather_rows(z_anchor, anchor_flat);
        auto fakes = generate_fake(anchors, m_gen, gp.w, gp.b, noise, sigma2);
        auto d = discriminate(anchors, fakes, m_disc);
        return scale(segment_mean(t_log(clamp_min(d, kLogFloor)), offsets), -1.0);
    };
    GanLoss out;
    out.sc_part = mean_all(side(z_sc, gp.m_disc_mp, gp.m_gen_mp, noise_mp));
    out.mp_part = mean_all(side(z_mp, gp.m_disc_sc, gp.m_gen_sc, noise_sc));
    out.total = scale(add(out.sc_part, out.mp_part), 0.5);
    return out;
}

namespace {

std::vector<NodeId> draw_batch(NodeId n, int batch_size, Rng& rng) {
    if (batch_size <= 0 || batch_size >= n) {
        std::vector<NodeId> all(static_cast<std::size_t>(n));
        for (NodeId i = 0; i < n; ++i) all[i] = i;
        return all;
    }
    std::vector<NodeId> out;
    for (std::size_t p : rng.sample_without_replacement(static_cast<std::size_t>(n),
                                                        static_cast<std::size_t>(batch_size)))
        out.push_back(static_cast<NodeId>(p));
    return out;
}

// 𝕡_i: uniform subset of the anchor's positive pool (the anchor's own
// other-view embedding counts as a positive).
std::vector<std::vector<NodeId>> draw_pos_subsets(const std::vector<NodeId>& batch,
                                                  const PositiveSets& ps, int pi_size, Rng& rng) {
    std::vector<std::vector<NodeId>> out(batch.size());
    for (std::size_t bi = 0; bi < batch.size(); ++bi) {
        const NodeId i = batch[bi];
        std::vector<NodeId> pool{i};
        pool.insert(pool.end(), ps.positives[i].begin(), ps.positives[i].end());
        const std::size_t take = std::min(pool.size(), static_cast<std::size_t>(pi_size));
        for (std::size_t p : rng.sample_without_replacement(pool.size(), take))
            out[bi].push_back(pool[p]);
    }
    return out;
}

std::size_t total_pairs(const std::vector<std::vector<NodeId>>& subsets) {
    std::size_t t = 0;
    for (const auto& s : subsets) t += s.size();
    return t;
}

EpochStats adversarial_epoch(HecoTrainer& trainer, const TensorPtr& z_sc, const TensorPtr& z_mp,
                             bool train_disc) {
    const auto& cfg = trainer.config();
    auto& rng = trainer.rng();
    const NodeId n = trainer.target_count();
    const std::size_t d = cfg.dim;

    auto batch = draw_batch(n, cfg.gan.batch, rng);
    GanLoss loss;
    if (train_disc) {
        auto subsets = draw_pos_subsets(batch, trainer.positives(), cfg.gan.pi_size, rng);
        const std::size_t pairs = total_pairs(subsets);
        auto noise_mp = draw_noise(pairs, d, rng);
        auto noise_sc = draw_noise(pairs, d, rng);
        loss = discriminator_loss(z_sc, z_mp, batch, subsets, trainer.params().gan, noise_mp,
                                  noise_sc, cfg.gan.sigma2);
    } else {
        const std::size_t pairs = batch.size() * static_cast<std::size_t>(cfg.gan.pi_size);
        auto noise_mp = draw_noise(pairs, d, rng);
        auto noise_sc = draw_noise(pairs, d, rng);
        loss = generator_loss(z_sc, z_mp, batch, cfg.gan.pi_size, trainer.params().gan, noise_mp,
                              noise_sc, cfg.gan.sigma2);
    }

    EpochStats st;
    st.epoch = trainer.epochs_run();
    st.phase = train_disc ? "disc" : "gen";
    st.j = loss.total->values[0];
    st.l_sc = loss.sc_part->values[0];
    st.l_mp = loss.mp_part->values[0];
    if (!std::isfinite(st.j))
        throw NumericError("non-finite adversarial loss (phase " + st.phase + ")");
    trainer.store().backward(loss.total);
    trainer.store().adam_step(cfg.lr, cfg.adam, train_disc ? "disc." : "gen.");
    trainer.append_stats(st);
    return st;
}

FakeNegatives make_fake_negatives(HecoTrainer& trainer, const TensorPtr& z_sc,
                                  const TensorPtr& z_mp) {
    const auto& cfg = trainer.config();
    auto& rng = trainer.rng();
    const NodeId n = trainer.target_count();
    const std::size_t k = static_cast<std::size_t>(cfg.gan.pi_size);
    const std::size_t d = cfg.dim;

    std::vector<std::size_t> rep;
    for (NodeId i = 0; i < n; ++i)
        for (std::size_t r = 0; r < k; ++r) rep.push_back(static_cast<std::size_t>(i));

    FakeNegatives fakes;
    fakes.per_anchor = cfg.gan.pi_size;
    const auto& gp = trainer.params().gan;
    auto fake_mp = generate_fake(gather_rows(z_sc, rep), gp.m_gen_mp, gp.w, gp.b,
                                 draw_noise(rep.size(), d, rng), cfg.gan.sigma2);
    auto fake_sc = generate_fake(gather_rows(z_mp, rep), gp.m_gen_sc, gp.w, gp.b,
                                 draw_noise(rep.size(), d, rng), cfg.gan.sigma2);
    fakes.mp = DenseMatrix(rep.size(), d);
    fakes.mp.v = fake_mp->values;
    fakes.sc = DenseMatrix(rep.size(), d);
    fakes.sc.v = fake_sc->values;
    return fakes;
}

}  // namespace

TrainResult train_heco_gan(HecoTrainer& trainer) {
    const auto& cfg = trainer.config();
    if (cfg.extension != Extension::Gan)
        throw ConfigError("train_heco_gan requires extension=gan");

    for (int e = 0; e < cfg.gan.k0 && !trainer.reached_max_epochs(); ++e)
        trainer.observe(trainer.train_epoch(nullptr, "warmup"));

    bool stop = trainer.reached_max_epochs();
    while (!stop) {
        // frozen snapshot of both views; adversarial phases never touch the encoder
        auto z = trainer.eval_embeddings();
        auto z_sc = make_matrix(z.z_sc.rows, z.z_sc.cols, z.z_sc.v);
        auto z_mp = make_matrix(z.z_mp.rows, z.z_mp.cols, z.z_mp.v);

        for (int it = 0; it < cfg.gan.i_dg; ++it) {
            for (int e = 0; e < cfg.gan.k_d; ++e) adversarial_epoch(trainer, z_sc, z_mp, true);
            for (int e = 0; e < cfg.gan.k_g; ++e) adversarial_epoch(trainer, z_sc, z_mp, false);
        }

        auto fakes = make_fake_negatives(trainer, z_sc, z_mp);
        for (int e = 0; e < cfg.gan.k_h; ++e) {
            if (trainer.reached_max_epochs()) {
                stop = true;
                break;
            }
            if (trainer.observe(trainer.train_epoch(&fakes, "boost"))) stop = true;
            if (stop) break;
        }
        if (trainer.reached_max_epochs()) stop = true;
    }
    return trainer.finalize();
}

TrainResult run_trainer(HecoTrainer& trainer) {
    if (trainer.config().extension == Extension::Gan) return train_heco_gan(trainer);
    return trainer.run();
}

TrainingRun run_training(const LoadedDataset& data, const TrainConfig& cfg) {
    std::vector<MetaPathGraph> mpgs;
    for (const auto& spec : data.metapaths) mpgs.push_back(build_metapath_graph(data.graph, spec));
    auto positives = select_positives(mpgs, cfg.t_pos);
    TrainingRun run;
    run.trainer = std::make_unique<HecoTrainer>(data.graph, std::move(mpgs), std::move(positives), cfg);
    run.result = run_trainer(*run.trainer);
    return run;
}

}  // namespace heco
