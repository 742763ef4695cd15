#include "heco/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "heco/errors.hpp"

namespace heco {

namespace {

int class_count(const std::vector<int>& labels) {
    int c = 0;
    for (int l : labels) c = std::max(c, l + 1);
    return c;
}

}  // namespace

Split make_split(const std::vector<int>& labels, int labels_per_class, int val_size, int test_size,
                 Rng& rng) {
    if (labels_per_class < 1) throw ConfigError("labels per class must be >= 1");
    if (val_size < 1 || test_size < 1) throw ConfigError("validation and test sizes must be >= 1");
    const int classes = class_count(labels);
    std::vector<std::vector<NodeId>> per_class(classes);
    for (std::size_t i = 0; i < labels.size(); ++i)
        per_class[labels[i]].push_back(static_cast<NodeId>(i));

    Split split;
    split.labels_per_class = labels_per_class;
    std::vector<NodeId> rest;
    for (int c = 0; c < classes; ++c) {
        auto& ids = per_class[c];
        if (static_cast<int>(ids.size()) < labels_per_class)
            throw DataError("class " + std::to_string(c) + " has only " +
                            std::to_string(ids.size()) + " nodes, need " +
                            std::to_string(labels_per_class) + " for training");
        auto order = rng.sample_without_replacement(ids.size(), ids.size());
        for (std::size_t p = 0; p < ids.size(); ++p) {
            if (p < static_cast<std::size_t>(labels_per_class))
                split.train.push_back(ids[order[p]]);
            else
                rest.push_back(ids[order[p]]);
        }
    }
    if (rest.size() < static_cast<std::size_t>(val_size + test_size))
        throw DataError("not enough nodes left for validation+test: have " +
                        std::to_string(rest.size()) + ", need " +
                        std::to_string(val_size + test_size));
    auto order = rng.sample_without_replacement(rest.size(), static_cast<std::size_t>(val_size + test_size));
    for (int p = 0; p < val_size; ++p) split.val.push_back(rest[order[p]]);
    for (int p = 0; p < test_size; ++p) split.test.push_back(rest[order[val_size + p]]);
    return split;
}

namespace {

DenseMatrix gather_embedding_rows(const DenseMatrix& emb, const std::vector<NodeId>& ids) {
    DenseMatrix out(ids.size(), emb.cols);
    for (std::size_t r = 0; r < ids.size(); ++r)
        for (std::size_t c = 0; c < emb.cols; ++c) out.at(r, c) = emb.at(ids[r], c);
    return out;
}

DenseMatrix softmax_rows_values(const DenseMatrix& logits) {
    DenseMatrix out(logits.rows, logits.cols);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        double mx = logits.at(r, 0);
        for (std::size_t c = 1; c < logits.cols; ++c) mx = std::max(mx, logits.at(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < logits.cols; ++c) {
            out.at(r, c) = std::exp(logits.at(r, c) - mx);
            z += out.at(r, c);
        }
        for (std::size_t c = 0; c < logits.cols; ++c) out.at(r, c) /= z;
    }
    return out;
}

DenseMatrix linear_scores(const DenseMatrix& w, const std::vector<double>& b,
                          const DenseMatrix& rows) {
    DenseMatrix logits(rows.rows, w.rows);
    for (std::size_t r = 0; r < rows.rows; ++r)
        for (std::size_t k = 0; k < w.rows; ++k) {
            double s = b[k];
            for (std::size_t c = 0; c < rows.cols; ++c) s += rows.at(r, c) * w.at(k, c);
            logits.at(r, k) = s;
        }
    return softmax_rows_values(logits);
}

double micro_f1_of(const std::vector<int>& preds, const std::vector<int>& labels) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == labels[i]) ++correct;
    return preds.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(preds.size());
}

}  // namespace

ProbeModel train_linear_probe(const DenseMatrix& emb, const std::vector<NodeId>& train_ids,
                              const std::vector<int>& train_labels,
                              const std::vector<NodeId>& val_ids,
                              const std::vector<int>& val_labels, int num_classes, int epochs,
                              double lr, Rng& rng) {
    if (train_ids.empty()) throw DataError("empty probe training set");
    if (train_ids.size() != train_labels.size() || val_ids.size() != val_labels.size())
        throw DataError("probe id/label length mismatch");
    std::vector<char> present(num_classes, 0);
    for (int l : train_labels) present[l] = 1;
    for (int c = 0; c < num_classes; ++c)
        if (!present[c])
            throw DataError("class " + std::to_string(c) + " is absent from the probe training set");

    auto x_train = gather_embedding_rows(emb, train_ids);
    auto x = make_matrix(x_train.rows, x_train.cols, x_train.v);
    std::vector<std::size_t> y(train_labels.begin(), train_labels.end());

    ParamStore store;
    auto w = store.add("probe.W", glorot_init(num_classes, emb.cols, rng));
    auto b = store.add("probe.b", make_vector(std::vector<double>(num_classes, 0.0), true));

    ProbeModel best;
    best.w = DenseMatrix(num_classes, emb.cols);
    best.b.assign(num_classes, 0.0);
    auto eval_val = [&]() {
        DenseMatrix cur_w(num_classes, emb.cols);
        cur_w.v = w->values;
        auto scores = linear_scores(cur_w, b->values, gather_embedding_rows(emb, val_ids));
        return micro_f1_of(argmax_rows(scores), val_labels);
    };

    for (int epoch = 1; epoch <= epochs; ++epoch) {
        auto logits = linear(x, w, b);
        auto ce = mean_all(sub(logsumexp_rows(logits), pick(logits, y)));
        store.backward(ce);
        store.adam_step(lr, AdamSettings{}, "probe.");
        const double val_micro = eval_val();
        if (epoch == 1 || val_micro > best.best_val_micro) {
            best.best_val_micro = val_micro;
            best.best_epoch = epoch;
            best.w.v = w->values;
            best.b = b->values;
        }
    }
    return best;
}

DenseMatrix probe_scores(const ProbeModel& model, const DenseMatrix& emb,
                         const std::vector<NodeId>& ids) {
    return linear_scores(model.w, model.b, gather_embedding_rows(emb, ids));
}

std::vector<int> argmax_rows(const DenseMatrix& scores) {
    std::vector<int> out(scores.rows);
    for (std::size_t r = 0; r < scores.rows; ++r) {
        int best = 0;
        for (std::size_t c = 1; c < scores.cols; ++c)
            if (scores.at(r, c) > scores.at(r, best)) best = static_cast<int>(c);
        out[r] = best;
    }
    return out;
}

namespace {

// Mann-Whitney AUC with average ranks for ties.
double binary_auc(const std::vector<double>& scores, const std::vector<char>& positive) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    double rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t k = 0; k < n; ++k)
        if (positive[k]) {
            rank_sum += rank[k];
            ++n_pos;
        }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::numeric_limits<double>::quiet_NaN();
    return (rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace

ClassificationMetrics classification_metrics(const std::vector<int>& predictions,
                                             const DenseMatrix& scores,
                                             const std::vector<int>& labels) {
    if (predictions.size() != labels.size() || scores.rows != labels.size())
        throw DataError("prediction/score/label length mismatch");
    ClassificationMetrics out;

    std::vector<char> seen;
    auto mark = [&](int c) {
        if (c >= static_cast<int>(seen.size())) seen.resize(c + 1, 0);
        seen[c] = 1;
    };
    for (int l : labels) mark(l);
    for (int p : predictions) mark(p);

    double f1_sum = 0.0;
    int f1_classes = 0;
    for (int c = 0; c < static_cast<int>(seen.size()); ++c) {
        if (!seen[c]) continue;
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const bool is_true = labels[i] == c, is_pred = predictions[i] == c;
            if (is_true && is_pred) ++tp;
            if (!is_true && is_pred) ++fp;
            if (is_true && !is_pred) ++fn;
        }
        const double denom = 2.0 * tp + fp + fn;
        f1_sum += denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
        ++f1_classes;
    }
    out.macro_f1 = f1_classes ? f1_sum / f1_classes : 0.0;
    out.micro_f1 = micro_f1_of(predictions, labels);

    double auc_sum = 0.0;
    int auc_classes = 0;
    for (std::size_t c = 0; c < scores.cols; ++c) {
        std::vector<double> col(labels.size());
        std::vector<char> pos(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) {
            col[i] = scores.at(i, c);
            pos[i] = labels[i] == static_cast<int>(c);
        }
        const double auc = binary_auc(col, pos);
        if (!std::isnan(auc)) {
            auc_sum += auc;
            ++auc_classes;
        }
    }
    out.auc = auc_classes ? auc_sum / auc_classes : 0.0;
    return out;
}

namespace {

double sq_dist(const DenseMatrix& points, std::size_t row, const std::vector<double>& center) {
    double s = 0.0;
    for (std::size_t c = 0; c < points.cols; ++c) {
        const double d = points.at(row, c) - center[c];
        s += d * d;
    }
    return s;
}

std::vector<std::vector<double>> kmeanspp_seed(const DenseMatrix& points, int k, Rng& rng) {
    const std::size_t n = points.rows;
    std::vector<std::vector<double>> centers;
    std::vector<double> min_d(n, std::numeric_limits<double>::max());
    std::size_t first = rng.index(n);
    centers.emplace_back(points.v.begin() + first * points.cols,
                         points.v.begin() + (first + 1) * points.cols);
    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            min_d[i] = std::min(min_d[i], sq_dist(points, i, centers.back()));
            total += min_d[i];
        }
        std::size_t chosen;
        if (total <= 0.0) {
            chosen = rng.index(n);
        } else {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            chosen = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += min_d[i];
                if (acc >= target) {
                    chosen = i;
                    break;
                }
            }
        }
        centers.emplace_back(points.v.begin() + chosen * points.cols,
                             points.v.begin() + (chosen + 1) * points.cols);
    }
    return centers;
}

}  // namespace

double kmeans_inertia(const DenseMatrix& points, const std::vector<int>& assignment, int k) {
    std::vector<std::vector<double>> centers(k, std::vector<double>(points.cols, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.rows; ++i) {
        ++counts[assignment[i]];
        for (std::size_t c = 0; c < points.cols; ++c) centers[assignment[i]][c] += points.at(i, c);
    }
    for (int j = 0; j < k; ++j)
        if (counts[j])
            for (auto& v : centers[j]) v /= static_cast<double>(counts[j]);
    double inertia = 0.0;
    for (std::size_t i = 0; i < points.rows; ++i) inertia += sq_dist(points, i, centers[assignment[i]]);
    return inertia;
}

std::vector<int> kmeans_cluster(const DenseMatrix& points, int k, int restarts, int max_iter,
                                Rng& rng) {
    if (k < 2) throw ConfigError("k must be >= 2");
    if (points.rows < static_cast<std::size_t>(k)) throw ConfigError("k exceeds point count");
    if (restarts < 1 || max_iter < 1) throw ConfigError("restarts and max_iter must be >= 1");

    const std::size_t n = points.rows;
    std::vector<int> best_assign;
    double best_inertia = std::numeric_limits<double>::max();

    for (int restart = 0; restart < restarts; ++restart) {
        auto centers = kmeanspp_seed(points, k, rng);
        std::vector<int> assign(n, -1);
        for (int iter = 0; iter < max_iter; ++iter) {
            bool changed = false;
            for (std::size_t i = 0; i < n; ++i) {
                int bestc = 0;
                double bestd = sq_dist(points, i, centers[0]);
                for (int j = 1; j < k; ++j) {
                    const double dist = sq_dist(points, i, centers[j]);
                    if (dist < bestd) {
                        bestd = dist;
                        bestc = j;
                    }
                }
                if (assign[i] != bestc) {
                    assign[i] = bestc;
                    changed = true;
                }
            }
            std::vector<std::size_t> counts(k, 0);
            for (auto& ctr : centers) std::fill(ctr.begin(), ctr.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                ++counts[assign[i]];
                for (std::size_t c = 0; c < points.cols; ++c)
                    centers[assign[i]][c] += points.at(i, c);
            }
            for (int j = 0; j < k; ++j)
                if (counts[j])
                    for (auto& v : centers[j]) v /= static_cast<double>(counts[j]);
            for (int j = 0; j < k; ++j) {
                if (counts[j]) continue;
                // reseed a dead centroid at the point farthest from its assigned center
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double dist = sq_dist(points, i, centers[assign[i]]);
                    if (dist > far_d) {
                        far_d = dist;
                        far = i;
                    }
                }
                centers[j].assign(points.v.begin() + far * points.cols,
                                  points.v.begin() + (far + 1) * points.cols);
                changed = true;
            }
            if (!changed) break;
        }
        const double inertia = kmeans_inertia(points, assign, k);
        if (inertia < best_inertia) {
            best_inertia = inertia;
            best_assign = assign;
        }
    }
    return best_assign;
}

ClusteringMetrics clustering_metrics(const std::vector<int>& assignment,
                                     const std::vector<int>& labels) {
    if (assignment.size() != labels.size()) throw DataError("assignment/label length mismatch");
    const std::size_t n = assignment.size();
    const int ka = class_count(assignment), kb = class_count(labels);
    DenseMatrix table(ka, kb);
    for (std::size_t i = 0; i < n; ++i) table.at(assignment[i], labels[i]) += 1.0;

    std::vector<double> row_sum(ka, 0.0), col_sum(kb, 0.0);
    for (int a = 0; a < ka; ++a)
        for (int b = 0; b < kb; ++b) {
            row_sum[a] += table.at(a, b);
            col_sum[b] += table.at(a, b);
        }

    const double dn = static_cast<double>(n);
    double mi = 0.0, ha = 0.0, hb = 0.0;
    for (int a = 0; a < ka; ++a)
        if (row_sum[a] > 0.0) ha -= row_sum[a] / dn * std::log(row_sum[a] / dn);
    for (int b = 0; b < kb; ++b)
        if (col_sum[b] > 0.0) hb -= col_sum[b] / dn * std::log(col_sum[b] / dn);
    for (int a = 0; a < ka; ++a)
        for (int b = 0; b < kb; ++b) {
            const double nij = table.at(a, b);
            if (nij > 0.0) mi += nij / dn * std::log(nij * dn / (row_sum[a] * col_sum[b]));
        }

    ClusteringMetrics out;
    const double norm = 0.5 * (ha + hb);
    if (norm <= 0.0)
        out.nmi = 1.0;  // both partitions trivial, hence identical
    else
        out.nmi = std::max(0.0, mi) / norm;

    auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
    double index = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (int a = 0; a < ka; ++a)
        for (int b = 0; b < kb; ++b) index += choose2(table.at(a, b));
    for (int a = 0; a < ka; ++a) sum_a += choose2(row_sum[a]);
    for (int b = 0; b < kb; ++b) sum_b += choose2(col_sum[b]);
    const double expected = sum_a * sum_b / choose2(dn);
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected)
        out.ari = 1.0;  // degenerate agreement
    else
        out.ari = (index - expected) / (max_index - expected);
    return out;
}

void EvalConfig::validate() const {
    if (labels_per_class.empty()) throw ConfigError("need at least one labels-per-class size");
    for (int s : labels_per_class)
        if (s < 1) throw ConfigError("labels per class must be >= 1");
    if (val_size < 1 || test_size < 1) throw ConfigError("validation and test sizes must be >= 1");
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    if (probe_epochs < 1) throw ConfigError("probe epochs must be >= 1");
    if (probe_lr <= 0.0) throw ConfigError("probe learning rate must be > 0");
    if (kmeans_restarts < 1 || kmeans_max_iter < 1)
        throw ConfigError("kmeans restarts and max_iter must be >= 1");
}

namespace {

MetricStat stat_of(const std::vector<double>& xs) {
    MetricStat s;
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(var / static_cast<double>(xs.size()));
    return s;
}

}  // namespace

MetricsReport evaluate_embeddings(const DenseMatrix& emb, const std::vector<int>& labels,
                                  const EvalConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (emb.rows != labels.size()) throw DataError("embedding row count does not match labels");
    const int classes = class_count(labels);

    MetricsReport report;
    report.split_sizes = cfg.labels_per_class;
    for (int size : cfg.labels_per_class) {
        std::vector<double> ma, mi, au;
        for (int rep = 0; rep < cfg.repeats; ++rep) {
            Rng rng(seed + 7919ull * static_cast<std::uint64_t>(rep) +
                    104729ull * static_cast<std::uint64_t>(size));
            auto split = make_split(labels, size, cfg.val_size, cfg.test_size, rng);
            auto pick_labels = [&](const std::vector<NodeId>& ids) {
                std::vector<int> out(ids.size());
                for (std::size_t i = 0; i < ids.size(); ++i) out[i] = labels[ids[i]];
                return out;
            };
            auto model = train_linear_probe(emb, split.train, pick_labels(split.train), split.val,
                                            pick_labels(split.val), classes, cfg.probe_epochs,
                                            cfg.probe_lr, rng);
            auto scores = probe_scores(model, emb, split.test);
            auto metrics = classification_metrics(argmax_rows(scores), scores, pick_labels(split.test));
            ma.push_back(metrics.macro_f1);
            mi.push_back(metrics.micro_f1);
            au.push_back(metrics.auc);
        }
        report.macro_f1.push_back(stat_of(ma));
        report.micro_f1.push_back(stat_of(mi));
        report.auc.push_back(stat_of(au));
    }

    std::vector<double> nmis, aris;
    for (int rep = 0; rep < cfg.repeats; ++rep) {
        Rng rng(seed + 15485863ull * static_cast<std::uint64_t>(rep + 1));
        auto assign = kmeans_cluster(emb, classes, cfg.kmeans_restarts, cfg.kmeans_max_iter, rng);
        auto metrics = clustering_metrics(assign, labels);
        nmis.push_back(metrics.nmi);
        aris.push_back(metrics.ari);
    }
    report.nmi = stat_of(nmis);
    report.ari = stat_of(aris);
    return report;
}

namespace {

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

std::string report_table(const MetricsReport& report) {
    std::ostringstream out;
    out << "split\tmetric\tmean\tstddev\n";
    for (std::size_t s = 0; s < report.split_sizes.size(); ++s) {
        const int size = report.split_sizes[s];
        out << size << "\tmacro_f1\t" << fmt4(report.macro_f1[s].mean) << "\t"
            << fmt4(report.macro_f1[s].stddev) << "\n";
        out << size << "\tmicro_f1\t" << fmt4(report.micro_f1[s].mean) << "\t"
            << fmt4(report.micro_f1[s].stddev) << "\n";
        out << size << "\tauc\t" << fmt4(report.auc[s].mean) << "\t" << fmt4(report.auc[s].stddev)
            << "\n";
    }
    out << "all\tnmi\t" << fmt4(report.nmi.mean) << "\t" << fmt4(report.nmi.stddev) << "\n";
    out << "all\tari\t" << fmt4(report.ari.mean) << "\t" << fmt4(report.ari.stddev) << "\n";
    return out.str();
}

std::string report_summary(const MetricsReport& report) {
    std::ostringstream out;
    for (std::size_t s = 0; s < report.split_sizes.size(); ++s) {
        out << "split " << report.split_sizes[s] << " labels/class: "
            << "macro-F1 " << fmt4(report.macro_f1[s].mean) << " ± " << fmt4(report.macro_f1[s].stddev)
            << ", micro-F1 " << fmt4(report.micro_f1[s].mean) << " ± " << fmt4(report.micro_f1[s].stddev)
            << ", AUC " << fmt4(report.auc[s].mean) << " ± " << fmt4(report.auc[s].stddev) << "\n";
    }
    out << "clustering: NMI " << fmt4(report.nmi.mean) << " ± " << fmt4(report.nmi.stddev)
        << ", ARI " << fmt4(report.ari.mean) << " ± " << fmt4(report.ari.stddev) << "\n";
    return out.str();
}

}  // namespace heco
