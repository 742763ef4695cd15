#pragma once

#include "heco/dataio.hpp"
#include "heco/params.hpp"

namespace heco {

// Per-class stratified draw: labels_per_class train nodes per class, then
// val_size and test_size nodes from the shuffled remainder; disjoint.
Split make_split(const std::vector<int>& labels, int labels_per_class, int val_size, int test_size,
                 Rng& rng);

struct ProbeModel {
    DenseMatrix w;  // classes × dim
    std::vector<double> b;
    double best_val_micro = 0.0;
    int best_epoch = 0;
};

// Multinomial logistic regression on frozen embeddings, selected at the
// best validation micro-F1. Test ids and labels never enter here.
ProbeModel train_linear_probe(const DenseMatrix& emb, const std::vector<NodeId>& train_ids,
                              const std::vector<int>& train_labels,
                              const std::vector<NodeId>& val_ids,
                              const std::vector<int>& val_labels, int num_classes, int epochs,
                              double lr, Rng& rng);

// Softmax class probabilities for the listed rows.
DenseMatrix probe_scores(const ProbeModel& model, const DenseMatrix& emb,
                         const std::vector<NodeId>& ids);
std::vector<int> argmax_rows(const DenseMatrix& scores);

struct ClassificationMetrics {
    double macro_f1 = 0.0, micro_f1 = 0.0, auc = 0.0;
};

// Macro-F1 over classes present in labels or predictions, micro-F1 as
// global accuracy, AUC one-vs-rest macro-averaged with tie-aware ranks.
ClassificationMetrics classification_metrics(const std::vector<int>& predictions,
                                             const DenseMatrix& scores,
                                             const std::vector<int>& labels);

// Lloyd's algorithm with k-means++ seeding; best inertia over restarts.
// Empty clusters are reseeded from the point farthest from its centroid.
std::vector<int> kmeans_cluster(const DenseMatrix& points, int k, int restarts, int max_iter,
                                Rng& rng);
double kmeans_inertia(const DenseMatrix& points, const std::vector<int>& assignment, int k);

struct ClusteringMetrics {
    double nmi = 0.0, ari = 0.0;
};

// NMI with arithmetic-mean normalization; standard adjusted Rand index.
ClusteringMetrics clustering_metrics(const std::vector<int>& assignment,
                                     const std::vector<int>& labels);

struct EvalConfig {
    std::vector<int> labels_per_class{20, 40, 60};
    int val_size = 1000;
    int test_size = 1000;
    int repeats = 10;
    int probe_epochs = 200;
    double probe_lr = 0.01;
    int kmeans_restarts = 10;
    int kmeans_max_iter = 300;

    void validate() const;
};

struct MetricStat {
    double mean = 0.0, stddev = 0.0;
};

struct MetricsReport {
    // classification rows, one per configured labels-per-class size
    std::vector<int> split_sizes;
    std::vector<MetricStat> macro_f1, micro_f1, auc;
    // clustering over all nodes
    MetricStat nmi, ari;
};

// Repeated-run protocol: each repeat redraws the split, probe init and
// clustering seeds; reports mean ± standard deviation.
MetricsReport evaluate_embeddings(const DenseMatrix& emb, const std::vector<int>& labels,
                                  const EvalConfig& cfg, std::uint64_t seed);

std::string report_table(const MetricsReport& report);
std::string report_summary(const MetricsReport& report);

}  // namespace heco
