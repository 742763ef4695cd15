#pragma once

#include <map>
#include <string>
#include <vector>

#include "heco/graph.hpp"
#include "heco/params.hpp"

namespace heco {

enum class Activation { Elu, Relu, Tanh };

TensorPtr apply_activation(const TensorPtr& x, Activation act);

enum class Extension { None, Mu, Gan };

struct MixConfig {
    int k = 4;  // hardest negatives mixed per anchor per direction
};

struct GanConfig {
    double sigma2 = 1.0;  // generator noise covariance scale
    int k0 = 50;          // warm-up epochs
    int k_d = 5;          // discriminator epochs per alternation
    int k_g = 5;          // generator epochs per alternation
    int i_dg = 3;         // alternations per outer iteration
    int k_h = 20;         // boosted training epochs per outer iteration
    int pi_size = 4;      // positives sampled per anchor (and fakes to match)
    int batch = 0;        // anchors per adversarial epoch; 0 = all
};

struct TrainConfig {
    std::size_t dim = 64;
    double tau = 0.8;
    double lambda = 0.5;
    int t_pos = 7;
    double lr = 0.0008;
    int patience = 5;
    int max_epochs = 1000;
    std::uint64_t seed = 1;
    double dropout_feat = 0.3;
    double dropout_attn = 0.5;
    double leaky_slope = 0.01;
    Activation activation = Activation::Elu;
    AdamSettings adam;
    std::map<std::string, int> sample_overrides;  // per type letter
    int sample_default = 5;
    Extension extension = Extension::None;
    MixConfig mu;
    GanConfig gan;

    void validate() const;
};

struct GanParams {
    TensorPtr m_disc_mp, m_disc_sc;  // bilinear discriminator maps
    TensorPtr m_gen_mp, m_gen_sc;    // generator projection maps
    TensorPtr w, b;                  // generator MLP, shared across views
};

// Every learnable tensor of the model, registered in a ParamStore under
// the "heco." prefix (GAN parameters under "disc."/"gen.").
struct HecoParams {
    std::map<TypeId, TensorPtr> proj_w, proj_b;  // per node type
    std::map<TypeId, TensorPtr> node_attn;       // per neighbor type, length 2d
    TensorPtr sc_w, sc_b, sc_a;
    TensorPtr mp_w, mp_b, mp_a;
    TensorPtr head_w1, head_b1, head_w2, head_b2;
    GanParams gan;
};

HecoParams init_heco_params(const HeteroGraph& g, const NetworkSchema& schema,
                            const TrainConfig& cfg, ParamStore& store, Rng& rng);

// Sample thresholds per neighbor type, letters resolved against the graph.
std::map<TypeId, int> resolve_sample_sizes(const HeteroGraph& g, const NetworkSchema& schema,
                                           const TrainConfig& cfg);

}  // namespace heco
