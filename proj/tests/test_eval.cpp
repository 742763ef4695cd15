#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "heco/errors.hpp"
#include "heco/eval.hpp"
#include "test_util.hpp"

using namespace heco;

namespace {

// labeled Gaussian blobs around fixed centers
std::pair<DenseMatrix, std::vector<int>> blobs(int per_class, int classes, double spread,
                                               Rng& rng) {
    DenseMatrix emb(per_class * classes, 2);
    std::vector<int> labels(per_class * classes);
    const double angle_step = 2.0 * M_PI / classes;
    for (int c = 0; c < classes; ++c)
        for (int i = 0; i < per_class; ++i) {
            const int row = c * per_class + i;
            emb.at(row, 0) = 4.0 * std::cos(c * angle_step) + spread * rng.normal();
            emb.at(row, 1) = 4.0 * std::sin(c * angle_step) + spread * rng.normal();
            labels[row] = c;
        }
    return {emb, labels};
}

}  // namespace

TEST_CASE("make_split draws stratified train sets") {
    Rng rng(1);
    std::vector<int> labels;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 40; ++i) labels.push_back(c);

    auto split = make_split(labels, 20, 25, 25, rng);
    CHECK(split.train.size() == 60);
    CHECK(split.val.size() == 25);
    CHECK(split.test.size() == 25);
    std::vector<int> per_class(3, 0);
    for (NodeId id : split.train) ++per_class[labels[id]];
    for (int c = 0; c < 3; ++c) CHECK(per_class[c] == 20);

    std::set<NodeId> all(split.train.begin(), split.train.end());
    for (NodeId id : split.val) CHECK(all.insert(id).second);
    for (NodeId id : split.test) CHECK(all.insert(id).second);

    SUBCASE("same seed twice gives identical id lists") {
        Rng a(9), b(9);
        auto sa = make_split(labels, 20, 25, 25, a);
        auto sb = make_split(labels, 20, 25, 25, b);
        CHECK(sa.train == sb.train);
        CHECK(sa.val == sb.val);
        CHECK(sa.test == sb.test);
    }
    SUBCASE("insufficient nodes fail loudly") {
        Rng r(2);
        CHECK_THROWS_AS(make_split(labels, 41, 5, 5, r), DataError);
        Rng r2(2);
        CHECK_THROWS_AS(make_split(labels, 39, 500, 500, r2), DataError);
    }
}

TEST_CASE("linear probe separates clean blobs perfectly") {
    Rng rng(11);
    auto [emb, labels] = blobs(30, 2, 0.2, rng);
    Rng split_rng(3);
    auto split = make_split(labels, 10, 15, 15, split_rng);
    auto pick_labels = [&](const std::vector<NodeId>& ids) {
        std::vector<int> out(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) out[i] = labels[ids[i]];
        return out;
    };
    Rng probe_rng(4);
    auto model = train_linear_probe(emb, split.train, pick_labels(split.train), split.val,
                                    pick_labels(split.val), 2, 120, 0.05, probe_rng);
    auto scores = probe_scores(model, emb, split.test);
    auto metrics = classification_metrics(argmax_rows(scores), scores, pick_labels(split.test));
    CHECK(metrics.micro_f1 == doctest::Approx(1.0));
    CHECK(metrics.macro_f1 == doctest::Approx(1.0));
    CHECK(metrics.auc == doctest::Approx(1.0));
}

TEST_CASE("identical embeddings are uninformative") {
    DenseMatrix emb(120, 4);
    for (auto& v : emb.v) v = 0.37;
    std::vector<int> labels(120);
    for (int i = 0; i < 120; ++i) labels[i] = i % 2;
    Rng rng(5);
    auto split = make_split(labels, 20, 30, 40, rng);
    auto pick_labels = [&](const std::vector<NodeId>& ids) {
        std::vector<int> out(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) out[i] = labels[ids[i]];
        return out;
    };
    Rng probe_rng(6);
    auto model = train_linear_probe(emb, split.train, pick_labels(split.train), split.val,
                                    pick_labels(split.val), 2, 100, 0.05, probe_rng);
    auto scores = probe_scores(model, emb, split.test);
    auto metrics = classification_metrics(argmax_rows(scores), scores, pick_labels(split.test));
    // constant features collapse to a constant prediction: chance-level accuracy
    CHECK(metrics.micro_f1 > 0.3);
    CHECK(metrics.micro_f1 < 0.7);
}

TEST_CASE("probe rejects training sets missing a class") {
    DenseMatrix emb(6, 2);
    std::vector<NodeId> train{0, 1, 2};
    std::vector<int> train_labels{0, 0, 0};
    std::vector<NodeId> val{3};
    std::vector<int> val_labels{1};
    Rng rng(1);
    CHECK_THROWS_AS(train_linear_probe(emb, train, train_labels, val, val_labels, 2, 10, 0.1, rng),
                    DataError);
}

TEST_CASE("probe matches an independent softmax-regression oracle") {
    Rng rng(21);
    auto [emb, labels] = blobs(40, 3, 0.5, rng);
    Rng split_rng(7);
    auto split = make_split(labels, 15, 30, 30, split_rng);
    auto pick_labels = [&](const std::vector<NodeId>& ids) {
        std::vector<int> out(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) out[i] = labels[ids[i]];
        return out;
    };
    Rng probe_rng(8);
    auto model = train_linear_probe(emb, split.train, pick_labels(split.train), split.val,
                                    pick_labels(split.val), 3, 200, 0.05, probe_rng);
    auto preds = argmax_rows(probe_scores(model, emb, split.test));

    // plain full-batch gradient descent on the same objective, no shared code
    const int classes = 3, dim = 2;
    std::vector<double> w(classes * dim, 0.0), b(classes, 0.0);
    const auto train_labels = pick_labels(split.train);
    for (int epoch = 0; epoch < 4000; ++epoch) {
        std::vector<double> gw(classes * dim, 0.0), gb(classes, 0.0);
        for (std::size_t s = 0; s < split.train.size(); ++s) {
            const NodeId id = split.train[s];
            std::vector<double> logits(classes);
            for (int c = 0; c < classes; ++c) {
                logits[c] = b[c];
                for (int k = 0; k < dim; ++k) logits[c] += w[c * dim + k] * emb.at(id, k);
            }
            const double mx = *std::max_element(logits.begin(), logits.end());
            double z = 0.0;
            for (int c = 0; c < classes; ++c) z += std::exp(logits[c] - mx);
            for (int c = 0; c < classes; ++c) {
                const double p = std::exp(logits[c] - mx) / z;
                const double g = p - (train_labels[s] == c ? 1.0 : 0.0);
                gb[c] += g;
                for (int k = 0; k < dim; ++k) gw[c * dim + k] += g * emb.at(id, k);
            }
        }
        for (int c = 0; c < classes; ++c) {
            b[c] -= 0.1 * gb[c] / split.train.size();
            for (int k = 0; k < dim; ++k) w[c * dim + k] -= 0.1 * gw[c * dim + k] / split.train.size();
        }
    }
    int mismatches = 0;
    for (std::size_t s = 0; s < split.test.size(); ++s) {
        const NodeId id = split.test[s];
        int best = 0;
        double best_v = -1e300;
        for (int c = 0; c < classes; ++c) {
            double v = b[c];
            for (int k = 0; k < dim; ++k) v += w[c * dim + k] * emb.at(id, k);
            if (v > best_v) {
                best_v = v;
                best = c;
            }
        }
        if (best != preds[s]) ++mismatches;
    }
    CHECK(mismatches <= 1);
}

TEST_CASE("classification metrics arithmetic") {
    SUBCASE("perfect predictions score one everywhere") {
        std::vector<int> labels{0, 1, 2, 0, 1, 2};
        DenseMatrix scores(6, 3);
        for (std::size_t i = 0; i < 6; ++i) scores.at(i, labels[i]) = 1.0;
        auto m = classification_metrics(labels, scores, labels);
        CHECK(m.macro_f1 == doctest::Approx(1.0));
        CHECK(m.micro_f1 == doctest::Approx(1.0));
        CHECK(m.auc == doctest::Approx(1.0));
    }
    SUBCASE("binary confusion TP=FP=FN=TN=1") {
        std::vector<int> labels{1, 0, 1, 0};
        std::vector<int> preds{1, 1, 0, 0};
        DenseMatrix scores(4, 2);
        for (std::size_t i = 0; i < 4; ++i) {
            scores.at(i, preds[i]) = 0.9;
            scores.at(i, 1 - preds[i]) = 0.1;
        }
        auto m = classification_metrics(preds, scores, labels);
        CHECK(m.micro_f1 == doctest::Approx(0.5));
        CHECK(m.macro_f1 == doctest::Approx(0.5));
    }
    SUBCASE("scores independent of labels give chance AUC") {
        Rng rng(14);
        const int n = 3000;
        std::vector<int> labels(n);
        DenseMatrix scores(n, 2);
        for (int i = 0; i < n; ++i) {
            labels[i] = static_cast<int>(rng.index(2));
            const double s = rng.uniform();
            scores.at(i, 0) = s;
            scores.at(i, 1) = 1.0 - s;
        }
        std::vector<int> preds = argmax_rows(scores);
        auto m = classification_metrics(preds, scores, labels);
        CHECK(std::abs(m.auc - 0.5) < 0.05);
    }
    SUBCASE("consistent relabeling leaves the metrics unchanged") {
        Rng rng(15);
        const int n = 200;
        std::vector<int> labels(n), preds(n);
        DenseMatrix scores(n, 3);
        for (int i = 0; i < n; ++i) {
            labels[i] = static_cast<int>(rng.index(3));
            preds[i] = static_cast<int>(rng.index(3));
            double z = 0.0;
            for (int c = 0; c < 3; ++c) {
                scores.at(i, c) = rng.uniform() + (c == preds[i] ? 1.0 : 0.0);
                z += scores.at(i, c);
            }
            for (int c = 0; c < 3; ++c) scores.at(i, c) /= z;
        }
        auto base = classification_metrics(preds, scores, labels);
        // permutation 0->2, 1->0, 2->1 applied to labels, predictions and columns
        const std::vector<int> perm{2, 0, 1};
        std::vector<int> labels_p(n), preds_p(n);
        DenseMatrix scores_p(n, 3);
        for (int i = 0; i < n; ++i) {
            labels_p[i] = perm[labels[i]];
            preds_p[i] = perm[preds[i]];
            for (int c = 0; c < 3; ++c) scores_p.at(i, perm[c]) = scores.at(i, c);
        }
        auto permuted = classification_metrics(preds_p, scores_p, labels_p);
        CHECK(base.macro_f1 == doctest::Approx(permuted.macro_f1).epsilon(1e-12));
        CHECK(base.micro_f1 == doctest::Approx(permuted.micro_f1).epsilon(1e-12));
        CHECK(base.auc == doctest::Approx(permuted.auc).epsilon(1e-12));
    }
    SUBCASE("length mismatches are rejected") {
        DenseMatrix scores(2, 2);
        CHECK_THROWS_AS(classification_metrics({0, 1}, scores, {0}), DataError);
    }
}

TEST_CASE("k-means recovers separated clouds") {
    Rng rng(31);
    auto [emb, labels] = blobs(25, 2, 0.3, rng);
    Rng km_rng(32);
    auto assign = kmeans_cluster(emb, 2, 5, 100, km_rng);
    auto m = clustering_metrics(assign, labels);
    CHECK(m.nmi == doctest::Approx(1.0));
    CHECK(m.ari == doctest::Approx(1.0));
}

TEST_CASE("k-means on identical points has zero inertia") {
    DenseMatrix emb(10, 3);
    for (auto& v : emb.v) v = 2.5;
    Rng rng(33);
    auto assign = kmeans_cluster(emb, 2, 3, 50, rng);
    CHECK(kmeans_inertia(emb, assign, 2) == doctest::Approx(0.0));
}

TEST_CASE("k-means assignment is nearest-centroid optimal") {
    Rng rng(34);
    DenseMatrix emb(30, 2);
    for (auto& v : emb.v) v = rng.uniform(-3, 3);
    Rng km_rng(35);
    const int k = 4;
    auto assign = kmeans_cluster(emb, k, 6, 200, km_rng);

    // oracle: with the centroids implied by the returned assignment, no
    // exhaustive reassignment can do better
    std::vector<std::vector<double>> centers(k, std::vector<double>(2, 0.0));
    std::vector<int> counts(k, 0);
    for (std::size_t i = 0; i < 30; ++i) {
        ++counts[assign[i]];
        for (int c = 0; c < 2; ++c) centers[assign[i]][c] += emb.at(i, c);
    }
    for (int j = 0; j < k; ++j)
        if (counts[j])
            for (auto& v : centers[j]) v /= counts[j];
    double best_possible = 0.0;
    for (std::size_t i = 0; i < 30; ++i) {
        double best = 1e300;
        for (int j = 0; j < k; ++j) {
            double dist = 0.0;
            for (int c = 0; c < 2; ++c) {
                const double diff = emb.at(i, c) - centers[j][c];
                dist += diff * diff;
            }
            best = std::min(best, dist);
        }
        best_possible += best;
    }
    CHECK(kmeans_inertia(emb, assign, k) <= best_possible + 1e-9);
}

TEST_CASE("clustering metrics") {
    SUBCASE("identity and permutation both score one") {
        std::vector<int> labels{0, 0, 1, 1, 2, 2};
        CHECK(clustering_metrics(labels, labels).nmi == doctest::Approx(1.0));
        CHECK(clustering_metrics(labels, labels).ari == doctest::Approx(1.0));
        std::vector<int> renamed{2, 2, 0, 0, 1, 1};
        CHECK(clustering_metrics(renamed, labels).nmi == doctest::Approx(1.0));
        CHECK(clustering_metrics(renamed, labels).ari == doctest::Approx(1.0));
    }
    SUBCASE("six-point contingency fixture matches hand-computed values") {
        std::vector<int> assignment{0, 0, 1, 1, 2, 2};
        std::vector<int> labels{0, 0, 0, 1, 1, 1};
        auto m = clustering_metrics(assignment, labels);

        // NMI from the contingency table {a0:(2,0), a1:(1,1), a2:(0,2)}
        auto h = [](std::vector<double> ps) {
            double e = 0.0;
            for (double p : ps)
                if (p > 0) e -= p * std::log(p);
            return e;
        };
        const double ha = h({2.0 / 6, 2.0 / 6, 2.0 / 6});
        const double hb = h({3.0 / 6, 3.0 / 6});
        const double mi = 2.0 / 6 * std::log((2.0 / 6) / ((2.0 / 6) * (3.0 / 6))) +
                          1.0 / 6 * std::log((1.0 / 6) / ((2.0 / 6) * (3.0 / 6))) * 2 +
                          2.0 / 6 * std::log((2.0 / 6) / ((2.0 / 6) * (3.0 / 6)));
        CHECK(m.nmi == doctest::Approx(mi / (0.5 * (ha + hb))).epsilon(1e-12));

        // ARI by direct pair counting over all 15 pairs
        int same_same = 0, same_diff = 0, diff_same = 0, diff_diff = 0;
        for (int i = 0; i < 6; ++i)
            for (int j = i + 1; j < 6; ++j) {
                const bool sa = assignment[i] == assignment[j];
                const bool sb = labels[i] == labels[j];
                if (sa && sb) ++same_same;
                else if (sa) ++same_diff;
                else if (sb) ++diff_same;
                else ++diff_diff;
            }
        const double total = 15.0;
        const double index = same_same;
        const double expected = (same_same + same_diff) * (same_same + diff_same) / total;
        const double max_index = 0.5 * ((same_same + same_diff) + (same_same + diff_same));
        CHECK(m.ari == doctest::Approx((index - expected) / (max_index - expected)).epsilon(1e-12));
    }
    SUBCASE("independent random labelings score near zero") {
        double nmi_sum = 0.0, ari_sum = 0.0;
        for (int run = 0; run < 5; ++run) {
            Rng rng(100 + run);
            std::vector<int> a(1000), b(1000);
            for (int i = 0; i < 1000; ++i) {
                a[i] = static_cast<int>(rng.index(3));
                b[i] = static_cast<int>(rng.index(4));
            }
            auto m = clustering_metrics(a, b);
            nmi_sum += m.nmi;
            ari_sum += m.ari;
        }
        CHECK(nmi_sum / 5.0 < 0.05);
        CHECK(std::abs(ari_sum / 5.0) < 0.05);
    }
}

TEST_CASE("the repeated-run report aggregates sanely") {
    Rng rng(41);
    auto [emb, labels] = blobs(40, 3, 0.4, rng);
    EvalConfig cfg;
    cfg.labels_per_class = {10};
    cfg.val_size = 20;
    cfg.test_size = 20;
    cfg.repeats = 3;
    cfg.probe_epochs = 80;
    cfg.probe_lr = 0.05;
    cfg.kmeans_restarts = 4;
    auto report = evaluate_embeddings(emb, labels, cfg, 77);
    REQUIRE(report.split_sizes == std::vector<int>{10});
    CHECK(report.micro_f1[0].mean > 0.9);
    CHECK(report.nmi.mean > 0.9);
    CHECK(report.micro_f1[0].stddev >= 0.0);
    const auto table = report_table(report);
    CHECK(table.find("micro_f1") != std::string::npos);
    const auto summary = report_summary(report);
    CHECK(summary.find("NMI") != std::string::npos);
}
