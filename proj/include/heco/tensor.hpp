#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "heco/errors.hpp"
#include "heco/rng.hpp"

namespace heco {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Reverse-mode tensor with eagerly computed values. Rank 0 (scalar),
// 1 (vector) or 2 (row-major matrix). Gradients accumulate additively
// across uses; buffers are 64-bit floats throughout.
class Tensor {
public:
    std::vector<std::size_t> shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;

    std::vector<TensorPtr> parents;
    std::function<void()> backward_fn;

    std::size_t numel() const { return values.size(); }
    bool is_scalar() const { return shape.empty(); }
    std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
    std::size_t cols() const { return shape.size() == 2 ? shape[1] : 1; }

    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
    }
    void zero_grad() {
        if (!grad.empty()) grad.assign(grad.size(), 0.0);
    }
};

// --- creation ---
TensorPtr make_tensor(std::vector<std::size_t> shape, std::vector<double> values,
                      bool requires_grad = false);
TensorPtr make_scalar(double v, bool requires_grad = false);
TensorPtr make_vector(std::vector<double> v, bool requires_grad = false);
TensorPtr make_matrix(std::size_t rows, std::size_t cols, std::vector<double> v,
                      bool requires_grad = false);
TensorPtr make_zeros(std::vector<std::size_t> shape, bool requires_grad = false);

// --- structure ---
TensorPtr reshape(const TensorPtr& x, std::vector<std::size_t> shape);
TensorPtr detach(const TensorPtr& x);
TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b);
TensorPtr stack_scalars(const std::vector<TensorPtr>& xs);
TensorPtr gather_rows(const TensorPtr& m, std::vector<std::size_t> idx);

// --- linear algebra ---
TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
// x (n×in), w (out×in), b (out) -> x·wᵀ + b
TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b);
TensorPtr matvec(const TensorPtr& m, const TensorPtr& v);
TensorPtr add_bias(const TensorPtr& m, const TensorPtr& b);
TensorPtr rowwise_dot(const TensorPtr& a, const TensorPtr& b);

// --- arithmetic ---
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& x, double c);
TensorPtr scale_rows(const TensorPtr& m, const std::vector<double>& s);
// coeffs (k) and k same-shape matrices -> Σ coeffs[i]·mats[i]
TensorPtr scalar_mix(const TensorPtr& coeffs, const std::vector<TensorPtr>& mats);

// --- elementwise ---
TensorPtr t_tanh(const TensorPtr& x);
TensorPtr elu(const TensorPtr& x);
TensorPtr leaky_relu(const TensorPtr& x, double slope);
TensorPtr t_exp(const TensorPtr& x);
TensorPtr t_log(const TensorPtr& x);
TensorPtr t_sigmoid(const TensorPtr& x);
TensorPtr clamp_min(const TensorPtr& x, double floor);
// Retained entries scaled by 1/(1-rate) in training mode; identity otherwise.
TensorPtr dropout(const TensorPtr& x, double rate, Rng& rng, bool training);

// --- reductions and groups ---
TensorPtr sum_all(const TensorPtr& x);
TensorPtr mean_all(const TensorPtr& x);
// Softmax within each half-open group [offsets[g], offsets[g+1]) of a vector.
TensorPtr softmax_groups(const TensorPtr& x, const std::vector<std::size_t>& offsets);
TensorPtr softmax_vec(const TensorPtr& x);
// out[g] = Σ_{e in group g} w[e] · rows[e,:]
TensorPtr segment_weighted_sum(const TensorPtr& w, const TensorPtr& rows,
                               const std::vector<std::size_t>& offsets);
TensorPtr segment_mean(const TensorPtr& x, const std::vector<std::size_t>& offsets);
// Per-group log Σ exp; an empty group yields -inf.
TensorPtr segment_logsumexp(const TensorPtr& x, const std::vector<std::size_t>& offsets);
// out[r] = m[r, cols[r]]
TensorPtr pick(const TensorPtr& m, const std::vector<std::size_t>& cols);

// --- similarity and log-sum-exp ---
TensorPtr cosine_matrix(const TensorPtr& a, const TensorPtr& b);
TensorPtr cosine_rows(const TensorPtr& a, const TensorPtr& b);
// Per row r of m: log Σ_{c in cols[r]} exp(m[r,c]); every cols[r] must be non-empty.
TensorPtr masked_logsumexp_rows(const TensorPtr& m, const std::vector<std::vector<int>>& cols);
TensorPtr logsumexp_rows(const TensorPtr& m);
// Elementwise log(exp a + exp b), numerically stable.
TensorPtr lse_merge(const TensorPtr& a, const TensorPtr& b);

// --- fixed sparse operator ---
struct SparseOp {
    std::size_t n = 0;
    std::vector<std::size_t> row_ptr;  // n+1 entries
    std::vector<std::size_t> col;
    std::vector<double> w;
};
// out = S·h for a constant square S; h is (n×d).
TensorPtr spmm(const SparseOp& s, const TensorPtr& h);

// Seeds d(loss)/d(loss)=1 and accumulates gradients through the graph.
void backward(const TensorPtr& loss);

}  // namespace heco
