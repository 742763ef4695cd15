#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "heco/rng.hpp"
#include "heco/tensor.hpp"

namespace testutil {

inline heco::TensorPtr random_matrix(std::size_t r, std::size_t c, heco::Rng& rng,
                                     double scale = 1.0, bool requires_grad = true) {
    std::vector<double> v(r * c);
    for (auto& x : v) x = scale * (rng.uniform() * 2.0 - 1.0);
    return heco::make_matrix(r, c, std::move(v), requires_grad);
}

inline heco::TensorPtr random_vector(std::size_t n, heco::Rng& rng, double scale = 1.0,
                                     bool requires_grad = true) {
    std::vector<double> v(n);
    for (auto& x : v) x = scale * (rng.uniform() * 2.0 - 1.0);
    return heco::make_vector(std::move(v), requires_grad);
}

// Reduce an op output to a scalar with fixed pseudo-random weights so that
// symmetric outputs (softmax rows, normalized scores) still expose their
// full Jacobian.
inline heco::TensorPtr weighted_loss(const heco::TensorPtr& out, std::uint64_t seed = 99) {
    heco::Rng rng(seed);
    std::vector<double> w(out->numel());
    for (auto& x : w) x = rng.uniform() * 2.0 - 1.0;
    auto weights = heco::make_tensor(out->shape, std::move(w));
    return heco::sum_all(heco::mul(out, weights));
}

// Max relative error between reverse-mode gradients and central differences
// over every coordinate of every input. build() must reconstruct the graph
// from the same input tensors.
inline double fd_max_rel_err(const std::vector<heco::TensorPtr>& inputs,
                             const std::function<heco::TensorPtr()>& build, double h = 1e-5) {
    for (const auto& t : inputs) {
        t->requires_grad = true;
        t->zero_grad();
    }
    auto loss = build();
    heco::backward(loss);
    double worst = 0.0;
    for (const auto& t : inputs) {
        t->ensure_grad();
        for (std::size_t i = 0; i < t->numel(); ++i) {
            const double keep = t->values[i];
            t->values[i] = keep + h;
            const double up = build()->values[0];
            t->values[i] = keep - h;
            const double dn = build()->values[0];
            t->values[i] = keep;
            const double fd = (up - dn) / (2.0 * h);
            const double an = t->grad[i];
            const double err =
                std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

// Unique scratch directory under the system temp root; removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("heco_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str() const { return path_.string(); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) return {};
    std::string out;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) out.append(buf, n);
    std::fclose(f);
    return out;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fwrite(content.data(), 1, content.size(), f);
    std::fclose(f);
}

}  // namespace testutil
