#include "heco/contrast.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "heco/errors.hpp"
#include "heco/extensions.hpp"

namespace heco {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

TensorPtr project(const TensorPtr& z, const HecoParams& p) {
    return linear(elu(linear(z, p.head_w1, p.head_b1)), p.head_w2, p.head_b2);
}

LossSets loss_sets(const PositiveSets& sets) {
    const std::size_t n = sets.positives.size();
    LossSets out;
    out.pos.resize(n);
    out.all.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.pos[i].push_back(static_cast<int>(i));
        for (NodeId j : sets.positives[i]) out.pos[i].push_back(j);
        out.all[i] = out.pos[i];
        for (NodeId j : sets.negatives[i]) out.all[i].push_back(j);
    }
    return out;
}

ContrastLoss contrastive_loss_lists(const TensorPtr& sims, double tau,
                                    const std::vector<std::vector<int>>& pos,
                                    const std::vector<std::vector<int>>& all,
                                    const TensorPtr& extra_lse) {
    if (tau <= 0.0) throw ConfigError("temperature must be > 0");
    auto scaled = scale(sims, 1.0 / tau);
    auto den = masked_logsumexp_rows(scaled, all);
    if (extra_lse) den = lse_merge(den, extra_lse);
    auto num = masked_logsumexp_rows(scaled, pos);
    ContrastLoss out;
    out.per_node = sub(den, num);
    out.mean = mean_all(out.per_node);
    return out;
}

ContrastLoss contrastive_loss(const TensorPtr& anchor_proj, const TensorPtr& other_proj,
                              const PositiveSets& sets, double tau) {
    auto lists = loss_sets(sets);
    return contrastive_loss_lists(cosine_matrix(anchor_proj, other_proj), tau, lists.pos, lists.all);
}

TensorPtr total_loss(const TensorPtr& l_sc_per_node, const TensorPtr& l_mp_per_node, double lambda) {
    if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda must be in [0,1]");
    return add(scale(mean_all(l_sc_per_node), lambda), scale(mean_all(l_mp_per_node), 1.0 - lambda));
}

HecoTrainer::HecoTrainer(const HeteroGraph& g, std::vector<MetaPathGraph> mpgs,
                         PositiveSets positives, TrainConfig cfg)
    : g_(g),
      mpgs_(std::move(mpgs)),
      positives_(std::move(positives)),
      cfg_(std::move(cfg)),
      schema_(derive_schema(g)),
      rng_(cfg_.seed) {
    cfg_.validate();
    if (mpgs_.empty()) throw DataError("training needs at least one meta-path");
    sample_sizes_ = resolve_sample_sizes(g_, schema_, cfg_);
    for (const auto& mpg : mpgs_) ops_.push_back(gcn_operator(mpg));
    params_ = init_heco_params(g_, schema_, cfg_, store_, rng_);
    sets_ = loss_sets(positives_);
}

TensorPtr HecoTrainer::extras_lse(const TensorPtr& anchor_proj, const TensorPtr& extra_rows,
                                  const std::vector<std::size_t>& anchor_of_row,
                                  const std::vector<std::size_t>& offsets) const {
    auto anchors = gather_rows(anchor_proj, anchor_of_row);
    auto sims = scale(cosine_rows(anchors, extra_rows), 1.0 / cfg_.tau);
    return segment_logsumexp(sims, offsets);
}

TensorPtr HecoTrainer::mu_extras(const TensorPtr& sims, const TensorPtr& anchor_proj,
                                 const TensorPtr& other_proj, Rng& rng) {
    const std::size_t n = static_cast<std::size_t>(g_.target_count());
    std::vector<std::size_t> src_a, src_b, anchor_of_row, offsets{0};
    std::vector<double> coeff;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row(sims->values.begin() + i * n, sims->values.begin() + (i + 1) * n);
        auto mix = mix_hard_negatives(row, positives_.negatives[i], cfg_.mu.k, rng);
        for (std::size_t r = 0; r < mix.coeff.size(); ++r) {
            src_a.push_back(static_cast<std::size_t>(mix.src_a[r]));
            src_b.push_back(static_cast<std::size_t>(mix.src_b[r]));
            coeff.push_back(mix.coeff[r]);
            anchor_of_row.push_back(i);
        }
        offsets.push_back(src_a.size());
    }
    if (src_a.empty()) return nullptr;
    std::vector<double> inv_coeff(coeff.size());
    for (std::size_t r = 0; r < coeff.size(); ++r) inv_coeff[r] = 1.0 - coeff[r];
    auto mixed = add(scale_rows(gather_rows(other_proj, src_a), coeff),
                     scale_rows(gather_rows(other_proj, src_b), inv_coeff));
    return extras_lse(anchor_proj, mixed, anchor_of_row, offsets);
}

HecoTrainer::Forward HecoTrainer::forward(bool training, Rng& rng, const FakeNegatives* fakes,
                                          bool with_loss) {
    Forward f;
    auto projected = project_features(g_, params_, cfg_, training, rng);
    auto sc = schema_view(g_, schema_, projected, params_, sample_sizes_, cfg_, training, rng);
    auto mp = metapath_view(projected[g_.target_type()], ops_, params_, cfg_, training, rng);
    f.z_sc = sc.z;
    f.z_mp = mp.z;
    f.beta_sc = sc.beta;
    f.beta_mp = mp.beta;
    if (!with_loss) return f;

    f.proj_sc = project(f.z_sc, params_);
    f.proj_mp = project(f.z_mp, params_);
    auto sims_sc = cosine_matrix(f.proj_sc, f.proj_mp);  // anchors from schema view
    auto sims_mp = cosine_matrix(f.proj_mp, f.proj_sc);  // anchors from meta-path view

    TensorPtr extra_sc, extra_mp;
    if (cfg_.extension == Extension::Mu && training) {
        extra_sc = mu_extras(sims_sc, f.proj_sc, f.proj_mp, rng);
        extra_mp = mu_extras(sims_mp, f.proj_mp, f.proj_sc, rng);
    }
    if (fakes && fakes->per_anchor > 0) {
        const std::size_t n = static_cast<std::size_t>(g_.target_count());
        const std::size_t k = static_cast<std::size_t>(fakes->per_anchor);
        std::vector<std::size_t> anchor_of_row(n * k), offsets(n + 1);
        for (std::size_t i = 0; i < n; ++i) {
            offsets[i + 1] = (i + 1) * k;
            for (std::size_t r = 0; r < k; ++r) anchor_of_row[i * k + r] = i;
        }
        auto fake_mp = project(make_matrix(fakes->mp.rows, fakes->mp.cols, fakes->mp.v), params_);
        auto fake_sc = project(make_matrix(fakes->sc.rows, fakes->sc.cols, fakes->sc.v), params_);
        auto lse_sc = extras_lse(f.proj_sc, fake_mp, anchor_of_row, offsets);
        auto lse_mp = extras_lse(f.proj_mp, fake_sc, anchor_of_row, offsets);
        extra_sc = extra_sc ? lse_merge(extra_sc, lse_sc) : lse_sc;
        extra_mp = extra_mp ? lse_merge(extra_mp, lse_mp) : lse_mp;
    }

    auto loss_sc = contrastive_loss_lists(sims_sc, cfg_.tau, sets_.pos, sets_.all, extra_sc);
    auto loss_mp = contrastive_loss_lists(sims_mp, cfg_.tau, sets_.pos, sets_.all, extra_mp);
    f.l_sc = loss_sc.mean;
    f.l_mp = loss_mp.mean;
    f.j = total_loss(loss_sc.per_node, loss_mp.per_node, cfg_.lambda);
    return f;
}

EpochStats HecoTrainer::train_epoch(const FakeNegatives* fakes, const std::string& phase) {
    ++epoch_;
    auto f = forward(true, rng_, fakes, true);
    EpochStats st;
    st.epoch = epoch_;
    st.phase = phase;
    st.j = f.j->values[0];
    st.l_sc = f.l_sc->values[0];
    st.l_mp = f.l_mp->values[0];
    st.beta_sc = f.beta_sc->values;
    st.beta_mp = f.beta_mp->values;
    if (!std::isfinite(st.j))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch_) + " (phase " +
                           phase + ")");
    store_.backward(f.j);
    store_.adam_step(cfg_.lr, cfg_.adam, "heco.");
    trace_.push_back(st);
    return st;
}

bool HecoTrainer::observe(const EpochStats& st) {
    if (!has_best_ || st.j < best_j_) {
        has_best_ = true;
        best_j_ = st.j;
        best_epoch_ = st.epoch;
        since_best_ = 0;
        best_values_ = store_.snapshot_values();
    } else {
        ++since_best_;
    }
    return since_best_ >= cfg_.patience;
}

TrainResult HecoTrainer::run() {
    while (epoch_ < cfg_.max_epochs) {
        auto st = train_epoch(nullptr, "train");
        if (observe(st)) break;
    }
    return finalize();
}

ViewEmbeddings HecoTrainer::eval_embeddings() {
    Rng eval_rng(cfg_.seed);
    auto f = forward(false, eval_rng, nullptr, false);
    ViewEmbeddings out;
    out.z_sc = DenseMatrix(f.z_sc->rows(), f.z_sc->cols());
    out.z_sc.v = f.z_sc->values;
    out.z_mp = DenseMatrix(f.z_mp->rows(), f.z_mp->cols());
    out.z_mp.v = f.z_mp->values;
    return out;
}

TensorPtr HecoTrainer::objective(Rng& rng, const FakeNegatives* fakes) {
    return forward(false, rng, fakes, true).j;
}

TrainResult HecoTrainer::finalize() {
    if (!has_best_) throw UsageError("finalize before any training epoch");
    store_.restore_values(best_values_);

    TrainResult r;
    Rng eval_rng(cfg_.seed);
    auto f = forward(false, eval_rng, nullptr, false);
    r.embeddings.m = DenseMatrix(f.z_mp->rows(), f.z_mp->cols());
    r.embeddings.m.v = f.z_mp->values;
    r.embeddings.view = "mp";
    r.embeddings.epoch = best_epoch_;
    r.embeddings_sc.m = DenseMatrix(f.z_sc->rows(), f.z_sc->cols());
    r.embeddings_sc.m.v = f.z_sc->values;
    r.embeddings_sc.view = "sc";
    r.embeddings_sc.epoch = best_epoch_;
    r.final_beta_sc = f.beta_sc->values;
    r.final_beta_mp = f.beta_mp->values;
    r.trace = trace_;
    r.best_epoch = best_epoch_;
    r.best_j = best_j_;
    for (TypeId t : schema_.neighbor_types_of_target) r.beta_sc_labels.push_back(g_.type_name(t));
    for (const auto& mpg : mpgs_) r.beta_mp_labels.push_back(mpg.spec.name);
    return r;
}

void write_loss_trace(const std::string& path, const TrainResult& r, bool with_phase) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write loss trace: " + path);
    for (const auto& st : r.trace) {
        out << st.epoch << "\t" << fmt_double(st.j) << "\t" << fmt_double(st.l_sc) << "\t"
            << fmt_double(st.l_mp);
        if (with_phase) out << "\t" << st.phase;
        out << "\n";
    }
}

void write_attention_trace(const std::string& path, const TrainResult& r) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write attention trace: " + path);
    auto row = [&](const std::string& epoch, const char* view, const std::vector<std::string>& labels,
                   const std::vector<double>& beta) {
        if (beta.empty()) return;
        out << epoch << "\t" << view;
        for (std::size_t i = 0; i < labels.size(); ++i)
            out << "\t" << labels[i] << "=" << fmt_double(beta[i]);
        out << "\n";
    };
    for (const auto& st : r.trace) {
        row(std::to_string(st.epoch), "sc", r.beta_sc_labels, st.beta_sc);
        row(std::to_string(st.epoch), "mp", r.beta_mp_labels, st.beta_mp);
    }
    row("final", "sc", r.beta_sc_labels, r.final_beta_sc);
    row("final", "mp", r.beta_mp_labels, r.final_beta_mp);
}

}  // namespace heco
