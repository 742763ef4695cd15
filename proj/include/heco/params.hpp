#pragma once

#include <map>
#include <string>
#include <vector>

#include "heco/rng.hpp"
#include "heco/tensor.hpp"

namespace heco {

struct AdamSettings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Uniform on ±sqrt(6/(fan_in+fan_out)); 2-D shapes only.
TensorPtr glorot_init(std::size_t fan_out, std::size_t fan_in, Rng& rng);

// Named learnable tensors plus per-parameter adaptive-moment state.
// Labels are unique; iteration is in label order, so updates and
// serialization are deterministic.
class ParamStore {
public:
    TensorPtr add(const std::string& label, TensorPtr t);
    const TensorPtr& get(const std::string& label) const;
    bool has(const std::string& label) const { return params_.count(label) > 0; }
    std::size_t size() const { return params_.size(); }

    // Label-ordered view of (label, tensor); optionally restricted to a prefix.
    std::vector<std::pair<std::string, TensorPtr>> items(const std::string& prefix = "") const;

    // Runs reverse-mode accumulation and unlocks optimizer steps.
    void backward(const TensorPtr& loss);

    // Bias-corrected adaptive-moment update over parameters whose label
    // starts with `prefix`; their gradients are zeroed afterwards.
    void adam_step(double lr, const AdamSettings& adam = {}, const std::string& prefix = "");

    void zero_grad();

    // Deep value snapshot / restore, for best-epoch checkpointing.
    std::map<std::string, std::vector<double>> snapshot_values() const;
    void restore_values(const std::map<std::string, std::vector<double>>& snap);

    void save(const std::string& path) const;
    // Loads values into already-registered parameters (shape-checked).
    void load(const std::string& path);

private:
    struct Moments {
        std::vector<double> m, v;
        long step = 0;
    };
    std::map<std::string, TensorPtr> params_;
    std::map<std::string, Moments> state_;
    bool backward_seen_ = false;
};

}  // namespace heco
