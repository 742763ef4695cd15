#include "heco/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

namespace heco {

namespace {

std::string shape_str(const Tensor& t) {
    std::string s = "(";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(t.shape[i]);
    }
    return s + ")";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape)
        throw TensorError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

TensorPtr new_node(std::vector<std::size_t> shape, std::size_t n, std::vector<TensorPtr> parents) {
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->values.assign(n, 0.0);
    for (const auto& p : parents)
        if (p->requires_grad) t->requires_grad = true;
    t->parents = std::move(parents);
    return t;
}

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

}  // namespace

TensorPtr make_tensor(std::vector<std::size_t> shape, std::vector<double> values, bool requires_grad) {
    if (shape.size() > 2) throw TensorError("rank > 2 not supported");
    if (shape_numel(shape) != values.size())
        throw TensorError("value count " + std::to_string(values.size()) + " does not match shape");
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->values = std::move(values);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr make_scalar(double v, bool requires_grad) {
    return make_tensor({}, {v}, requires_grad);
}

TensorPtr make_vector(std::vector<double> v, bool requires_grad) {
    const std::size_t n = v.size();
    return make_tensor({n}, std::move(v), requires_grad);
}

TensorPtr make_matrix(std::size_t rows, std::size_t cols, std::vector<double> v, bool requires_grad) {
    return make_tensor({rows, cols}, std::move(v), requires_grad);
}

TensorPtr make_zeros(std::vector<std::size_t> shape, bool requires_grad) {
    std::vector<double> v(shape_numel(shape), 0.0);
    return make_tensor(std::move(shape), std::move(v), requires_grad);
}

// --- structure ---

TensorPtr reshape(const TensorPtr& x, std::vector<std::size_t> shape) {
    if (shape_numel(shape) != x->numel()) throw TensorError("reshape: element count mismatch");
    auto out = new_node(std::move(shape), x->numel(), {x});
    out->values = x->values;
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr px = x;
        out->backward_fn = [o, px]() {
            px->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i) px->grad[i] += o->grad[i];
        };
    }
    return out;
}

TensorPtr detach(const TensorPtr& x) {
    auto t = std::make_shared<Tensor>();
    t->shape = x->shape;
    t->values = x->values;
    return t;
}

TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape.size() != 2 || b->shape.size() != 2 || a->rows() != b->rows())
        throw TensorError("concat_cols: need matrices with equal row counts");
    const std::size_t n = a->rows(), ca = a->cols(), cb = b->cols();
    auto out = new_node({n, ca + cb}, n * (ca + cb), {a, b});
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < ca; ++c) out->values[r * (ca + cb) + c] = a->values[r * ca + c];
        for (std::size_t c = 0; c < cb; ++c) out->values[r * (ca + cb) + ca + c] = b->values[r * cb + c];
    }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a, pb = b;
        out->backward_fn = [o, pa, pb, n, ca, cb]() {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < ca; ++c)
                        pa->grad[r * ca + c] += o->grad[r * (ca + cb) + c];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < cb; ++c)
                        pb->grad[r * cb + c] += o->grad[r * (ca + cb) + ca + c];
            }
        };
    }
    return out;
}

TensorPtr stack_scalars(const std::vector<TensorPtr>& xs) {
    std::vector<TensorPtr> parents;
    for (const auto& x : xs) {
        if (!x->is_scalar()) throw TensorError("stack_scalars: inputs must be scalars");
        parents.push_back(x);
    }
    auto out = new_node({xs.size()}, xs.size(), parents);
    for (std::size_t i = 0; i < xs.size(); ++i) out->values[i] = xs[i]->values[0];
    if (out->requires_grad) {
        Tensor* o = out.get();
        std::vector<TensorPtr> ps = xs;
        out->backward_fn = [o, ps]() {
            for (std::size_t i = 0; i < ps.size(); ++i) {
                if (!ps[i]->requires_grad) continue;
                ps[i]->ensure_grad();
                ps[i]->grad[0] += o->grad[i];
            }
        };
    }
    return out;
}

TensorPtr gather_rows(const TensorPtr& m, std::vector<std::size_t> idx) {
    if (m->shape.size() != 2) throw TensorError("gather_rows: need a matrix");
    const std::size_t d = m->cols();
    for (auto i : idx)
        if (i >= m->rows()) throw TensorError("gather_rows: index out of range");
    auto out = new_node({idx.size(), d}, idx.size() * d, {m});
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < d; ++c) out->values[r * d + c] = m->values[idx[r] * d + c];
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pm = m;
        out->backward_fn = [o, pm, idx = std::move(idx), d]() {
            pm->ensure_grad();
            for (std::size_t r = 0; r < idx.size(); ++r)
                for (std::size_t c = 0; c < d; ++c)
                    pm->grad[idx[r] * d + c] += o->grad[r * d + c];
        };
    }
    return out;
}

// --- linear algebra ---

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape.size() != 2 || b->shape.size() != 2 || a->cols() != b->rows())
        throw TensorError("matmul: incompatible shapes " + shape_str(*a) + " x " + shape_str(*b));
    const std::size_t n = a->rows(), k = a->cols(), m = b->cols();
    auto out = new_node({n, m}, n * m, {a, b});
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < k; ++j) {
            const double av = a->values[r * k + j];
            if (av == 0.0) continue;
            for (std::size_t c = 0; c < m; ++c) out->values[r * m + c] += av * b->values[j * m + c];
        }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a, pb = b;
        out->backward_fn = [o, pa, pb, n, k, m]() {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t j = 0; j < k; ++j) {
                        double s = 0.0;
                        for (std::size_t c = 0; c < m; ++c)
                            s += o->grad[r * m + c] * pb->values[j * m + c];
                        pa->grad[r * k + j] += s;
                    }
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t j = 0; j < k; ++j)
                    for (std::size_t c = 0; c < m; ++c) {
                        double s = 0.0;
                        for (std::size_t r = 0; r < n; ++r)
                            s += pa->values[r * k + j] * o->grad[r * m + c];
                        pb->grad[j * m + c] += s;
                    }
            }
        };
    }
    return out;
}

TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
    if (x->shape.size() != 2 || w->shape.size() != 2 || x->cols() != w->cols())
        throw TensorError("linear: incompatible shapes " + shape_str(*x) + " vs weight " + shape_str(*w));
    const std::size_t n = x->rows(), in = x->cols(), outdim = w->rows();
    if (b->shape != std::vector<std::size_t>{outdim}) throw TensorError("linear: bias shape mismatch");
    auto out = new_node({n, outdim}, n * outdim, {x, w, b});
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t o_ = 0; o_ < outdim; ++o_) {
            double s = b->values[o_];
            for (std::size_t j = 0; j < in; ++j) s += x->values[r * in + j] * w->values[o_ * in + j];
            out->values[r * outdim + o_] = s;
        }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr px = x, pw = w, pb = b;
        out->backward_fn = [o, px, pw, pb, n, in, outdim]() {
            if (px->requires_grad) {
                px->ensure_grad();
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t j = 0; j < in; ++j) {
                        double s = 0.0;
                        for (std::size_t k = 0; k < outdim; ++k)
                            s += o->grad[r * outdim + k] * pw->values[k * in + j];
                        px->grad[r * in + j] += s;
                    }
            }
            if (pw->requires_grad) {
                pw->ensure_grad();
                for (std::size_t k = 0; k < outdim; ++k)
                    for (std::size_t j = 0; j < in; ++j) {
                        double s = 0.0;
                        for (std::size_t r = 0; r < n; ++r)
                            s += o->grad[r * outdim + k] * px->values[r * in + j];
                        pw->grad[k * in + j] += s;
                    }
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t k = 0; k < outdim; ++k) {
                    double s = 0.0;
                    for (std::size_t r = 0; r < n; ++r) s += o->grad[r * outdim + k];
                    pb->grad[k] += s;
                }
            }
        };
    }
    return out;
}

TensorPtr matvec(const TensorPtr& m, const TensorPtr& v) {
    if (m->shape.size() != 2 || v->shape.size() != 1 || m->cols() != v->shape[0])
        throw TensorError("matvec: incompatible shapes " + shape_str(*m) + " x " + shape_str(*v));
    const std::size_t n = m->rows(), d = m->cols();
    auto out = new_node({n}, n, {m, v});
    for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += m->values[r * d + c] * v->values[c];
        out->values[r] = s;
    }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pm = m, pv = v;
        out->backward_fn = [o, pm, pv, n, d]() {
            if (pm->requires_grad) {
                pm->ensure_grad();
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < d; ++c) pm->grad[r * d + c] += o->grad[r] * pv->values[c];
            }
            if (pv->requires_grad) {
                pv->ensure_grad();
                for (std::size_t c = 0; c < d; ++c) {
                    double s = 0.0;
                    for (std::size_t r = 0; r < n; ++r) s += o->grad[r] * pm->values[r * d + c];
                    pv->grad[c] += s;
                }
            }
        };
    }
    return out;
}

TensorPtr add_bias(const TensorPtr& m, const TensorPtr& b) {
    if (m->shape.size() != 2 || b->shape != std::vector<std::size_t>{m->cols()})
        throw TensorError("add_bias: incompatible shapes " + shape_str(*m) + " + " + shape_str(*b));
    const std::size_t n = m->rows(), d = m->cols();
    auto out = new_node({n, d}, n * d, {m, b});
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) out->values[r * d + c] = m->values[r * d + c] + b->values[c];
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pm = m, pb = b;
        out->backward_fn = [o, pm, pb, n, d]() {
            if (pm->requires_grad) {
                pm->ensure_grad();
                for (std::size_t i = 0; i < n * d; ++i) pm->grad[i] += o->grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < d; ++c) pb->grad[c] += o->grad[r * d + c];
            }
        };
    }
    return out;
}

TensorPtr rowwise_dot(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape(*a, *b, "rowwise_dot");
    if (a->shape.size() != 2) throw TensorError("rowwise_dot: need matrices");
    const std::size_t n = a->rows(), d = a->cols();
    auto out = new_node({n}, n, {a, b});
    for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += a->values[r * d + c] * b->values[r * d + c];
        out->values[r] = s;
    }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a, pb = b;
        out->backward_fn = [o, pa, pb, n, d]() {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < d; ++c)
                        pa->grad[r * d + c] += o->grad[r] * pb->values[r * d + c];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < d; ++c)
                        pb->grad[r * d + c] += o->grad[r] * pa->values[r * d + c];
            }
        };
    }
    return out;
}

// --- arithmetic ---

namespace {

TensorPtr binary_elementwise(const TensorPtr& a, const TensorPtr& b, const char* name,
                             double (*fwd)(double, double), double (*da)(double, double),
                             double (*db)(double, double)) {
    require_same_shape(*a, *b, name);
    auto out = new_node(a->shape, a->numel(), {a, b});
    for (std::size_t i = 0; i < a->numel(); ++i) out->values[i] = fwd(a->values[i], b->values[i]);
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a, pb = b;
        out->backward_fn = [o, pa, pb, da, db]() {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < o->grad.size(); ++i)
                    pa->grad[i] += o->grad[i] * da(pa->values[i], pb->values[i]);
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < o->grad.size(); ++i)
                    pb->grad[i] += o->grad[i] * db(pa->values[i], pb->values[i]);
            }
        };
    }
    return out;
}

}  // namespace

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    return binary_elementwise(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
    return binary_elementwise(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    return binary_elementwise(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

TensorPtr scale(const TensorPtr& x, double c) {
    auto out = new_node(x->shape, x->numel(), {x});
    for (std::size_t i = 0; i < x->numel(); ++i) out->values[i] = c * x->values[i];
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr px = x;
        out->backward_fn = [o, px, c]() {
            px->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i) px->grad[i] += c * o->grad[i];
        };
    }
    return out;
}

TensorPtr scale_rows(const TensorPtr& m, const std::vector<double>& s) {
    if (m->shape.size() != 2 || s.size() != m->rows())
        throw TensorError("scale_rows: need matrix with one scale per row");
    const std::size_t n = m->rows(), d = m->cols();
    auto out = new_node({n, d}, n * d, {m});
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) out->values[r * d + c] = s[r] * m->values[r * d + c];
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pm = m;
        out->backward_fn = [o, pm, s, n, d]() {
            pm->ensure_grad();
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < d; ++c) pm->grad[r * d + c] += s[r] * o->grad[r * d + c];
        };
    }
    return out;
}

TensorPtr scalar_mix(const TensorPtr& coeffs, const std::vector<TensorPtr>& mats) {
    if (coeffs->shape.size() != 1 || coeffs->shape[0] != mats.size())
        throw TensorError("scalar_mix: coefficient count must match matrix count");
    if (mats.empty()) throw TensorError("scalar_mix: no matrices");
    std::vector<TensorPtr> parents{coeffs};
    for (const auto& m : mats) {
        require_same_shape(*m, *mats[0], "scalar_mix");
        parents.push_back(m);
    }
    auto out = new_node(mats[0]->shape, mats[0]->numel(), parents);
    for (std::size_t k = 0; k < mats.size(); ++k) {
        const double c = coeffs->values[k];
        for (std::size_t i = 0; i < out->numel(); ++i) out->values[i] += c * mats[k]->values[i];
    }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pc = coeffs;
        std::vector<TensorPtr> pm = mats;
        out->backward_fn = [o, pc, pm]() {
            if (pc->requires_grad) {
                pc->ensure_grad();
                for (std::size_t k = 0; k < pm.size(); ++k) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < o->grad.size(); ++i) s += o->grad[i] * pm[k]->values[i];
                    pc->grad[k] += s;
                }
            }
            for (std::size_t k = 0; k < pm.size(); ++k) {
                if (!pm[k]->requires_grad) continue;
                pm[k]->ensure_grad();
                const double c = pc->values[k];
                for (std::size_t i = 0; i < o->grad.size(); ++i) pm[k]->grad[i] += c * o->grad[i];
            }
        };
    }
    return out;
}

// --- elementwise ---

namespace {

TensorPtr unary_elementwise(const TensorPtr& x, double (*fwd)(double),
                            double (*dfn)(double /*x*/, double /*y*/)) {
    auto out = new_node(x->shape, x->numel(), {x});
    for (std::size_t i = 0; i < x->numel(); ++i) out->values[i] = fwd(x->values[i]);
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr px = x;
        out->backward_fn = [o, px, dfn]() {
            px->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i)
                px->grad[i] += o->grad[i] * dfn(px->values[i], o->values[i]);
        };
    }
    return out;
}

}  // namespace

TensorPtr t_tanh(const TensorPtr& x) {
    return unary_elementwise(
        x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

TensorPtr elu(const TensorPtr& x) {
    return unary_elementwise(
        x, [](double v) { return v > 0.0 ? v : std::expm1(v); },
        [](double v, double y) { return v > 0.0 ? 1.0 : y + 1.0; });
}

TensorPtr leaky_relu(const TensorPtr& x, double slope) {
    auto out = new_node(x->shape, x->numel(), {x});
    for (std::size_t i = 0; i < x->numel(); ++i) {
        const double v = x->values[i];
        out->values[i] = v > 0.0 ? v : slope * v;
    }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr px = x;
        out->backward_fn = [o, px, slope]() {
            px->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i)
                px->grad[i] += o->grad[i] * (px->values[i] > 0.0 ? 1.0 : slope);
        };
    }
    return out;
}

TensorPtr t_exp(const TensorPtr& x) {
    return unary_elementwise(
        x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

TensorPtr t_log(const TensorPtr& x) {
    return unary_elementwise(
        x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

TensorPtr t_sigmoid(const TensorPtr& x) {
    return unary_elementwise(
        x,
        [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
        [](double, double y) { return y * (1.0 - y); });
}

TensorPtr clamp_min(const TensorPtr& x, double floor) {
    auto out = new_node(x->shape, x->numel(), {x});
    for (std::size_t i = 0; i < x->numel(); ++i) out->values[i] = std::max(x->values[i], floor);
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr px = x;
        out->backward_fn = [o, px, floor]() {
            px->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i)
                if (px->values[i] > floor) px->grad[i] += o->grad[i];
        };
    }
    return out;
}

TensorPtr dropout(const TensorPtr& x, double rate, Rng& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0) throw TensorError("dropout: rate must be in [0,1)");
    if (!training || rate == 0.0) return x;
    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(x->numel());
    for (std::size_t i = 0; i < x->numel(); ++i) mask[i] = rng.bernoulli(rate) ? 0.0 : keep_scale;
    auto out = new_node(x->shape, x->numel(), {x});
    for (std::size_t i = 0; i < x->numel(); ++i) out->values[i] = mask[i] * x->values[i];
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr px = x;
        out->backward_fn = [o, px, mask = std::move(mask)]() {
            px->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i) px->grad[i] += mask[i] * o->grad[i];
        };
    }
    return out;
}

// --- reductions and groups ---

TensorPtr sum_all(const TensorPtr& x) {
    auto out = new_node({}, 1, {x});
    double s = 0.0;
    for (double v : x->values) s += v;
    out->values[0] = s;
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr px = x;
        out->backward_fn = [o, px]() {
            px->ensure_grad();
            for (std::size_t i = 0; i < px->grad.size(); ++i) px->grad[i] += o->grad[0];
        };
    }
    return out;
}

TensorPtr mean_all(const TensorPtr& x) {
    if (x->numel() == 0) throw TensorError("mean_all: empty tensor");
    auto out = new_node({}, 1, {x});
    double s = 0.0;
    for (double v : x->values) s += v;
    const double inv = 1.0 / static_cast<double>(x->numel());
    out->values[0] = s * inv;
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr px = x;
        out->backward_fn = [o, px, inv]() {
            px->ensure_grad();
            for (std::size_t i = 0; i < px->grad.size(); ++i) px->grad[i] += inv * o->grad[0];
        };
    }
    return out;
}

TensorPtr softmax_groups(const TensorPtr& x, const std::vector<std::size_t>& offsets) {
    if (x->shape.size() != 1) throw TensorError("softmax_groups: need a vector");
    if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != x->numel())
        throw TensorError("softmax_groups: bad offsets");
    auto out = new_node(x->shape, x->numel(), {x});
    for (std::size_t g = 0; g + 1 < offsets.size(); ++g) {
        const std::size_t lo = offsets[g], hi = offsets[g + 1];
        if (lo >= hi) throw TensorError("softmax_groups: empty group");
        double m = x->values[lo];
        for (std::size_t i = lo + 1; i < hi; ++i) m = std::max(m, x->values[i]);
        double z = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            out->values[i] = std::exp(x->values[i] - m);
            z += out->values[i];
        }
        for (std::size_t i = lo; i < hi; ++i) out->values[i] /= z;
    }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr px = x;
        out->backward_fn = [o, px, offsets]() {
            px->ensure_grad();
            for (std::size_t g = 0; g + 1 < offsets.size(); ++g) {
                const std::size_t lo = offsets[g], hi = offsets[g + 1];
                double dot = 0.0;
                for (std::size_t i = lo; i < hi; ++i) dot += o->grad[i] * o->values[i];
                for (std::size_t i = lo; i < hi; ++i)
                    px->grad[i] += o->values[i] * (o->grad[i] - dot);
            }
        };
    }
    return out;
}

TensorPtr softmax_vec(const TensorPtr& x) {
    return softmax_groups(x, {0, x->numel()});
}

TensorPtr segment_weighted_sum(const TensorPtr& w, const TensorPtr& rows,
                               const std::vector<std::size_t>& offsets) {
    if (w->shape.size() != 1 || rows->shape.size() != 2 || w->numel() != rows->rows())
        throw TensorError("segment_weighted_sum: need weights per row");
    if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != w->numel())
        throw TensorError("segment_weighted_sum: bad offsets");
    const std::size_t groups = offsets.size() - 1, d = rows->cols();
    auto out = new_node({groups, d}, groups * d, {w, rows});
    for (std::size_t g = 0; g < groups; ++g)
        for (std::size_t e = offsets[g]; e < offsets[g + 1]; ++e) {
            const double we = w->values[e];
            for (std::size_t c = 0; c < d; ++c) out->values[g * d + c] += we * rows->values[e * d + c];
        }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pw = w, pr = rows;
        out->backward_fn = [o, pw, pr, offsets, groups, d]() {
            if (pw->requires_grad) {
                pw->ensure_grad();
                for (std::size_t g = 0; g < groups; ++g)
                    for (std::size_t e = offsets[g]; e < offsets[g + 1]; ++e) {
                        double s = 0.0;
                        for (std::size_t c = 0; c < d; ++c)
                            s += o->grad[g * d + c] * pr->values[e * d + c];
                        pw->grad[e] += s;
                    }
            }
            if (pr->requires_grad) {
                pr->ensure_grad();
                for (std::size_t g = 0; g < groups; ++g)
                    for (std::size_t e = offsets[g]; e < offsets[g + 1]; ++e) {
                        const double we = pw->values[e];
                        for (std::size_t c = 0; c < d; ++c)
                            pr->grad[e * d + c] += we * o->grad[g * d + c];
                    }
            }
        };
    }
    return out;
}

TensorPtr segment_mean(const TensorPtr& x, const std::vector<std::size_t>& offsets) {
    if (x->shape.size() != 1) throw TensorError("segment_mean: need a vector");
    if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != x->numel())
        throw TensorError("segment_mean: bad offsets");
    const std::size_t groups = offsets.size() - 1;
    auto out = new_node({groups}, groups, {x});
    for (std::size_t g = 0; g < groups; ++g) {
        if (offsets[g] >= offsets[g + 1]) throw TensorError("segment_mean: empty group");
        double s = 0.0;
        for (std::size_t e = offsets[g]; e < offsets[g + 1]; ++e) s += x->values[e];
        out->values[g] = s / static_cast<double>(offsets[g + 1] - offsets[g]);
    }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr px = x;
        out->backward_fn = [o, px, offsets, groups]() {
            px->ensure_grad();
            for (std::size_t g = 0; g < groups; ++g) {
                const double inv = 1.0 / static_cast<double>(offsets[g + 1] - offsets[g]);
                for (std::size_t e = offsets[g]; e < offsets[g + 1]; ++e)
                    px->grad[e] += inv * o->grad[g];
            }
        };
    }
    return out;
}

TensorPtr segment_logsumexp(const TensorPtr& x, const std::vector<std::size_t>& offsets) {
    if (x->shape.size() != 1) throw TensorError("segment_logsumexp: need a vector");
    if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != x->numel())
        throw TensorError("segment_logsumexp: bad offsets");
    const std::size_t groups = offsets.size() - 1;
    auto out = new_node({groups}, groups, {x});
    for (std::size_t g = 0; g < groups; ++g) {
        if (offsets[g] == offsets[g + 1]) {
            out->values[g] = -std::numeric_limits<double>::infinity();
            continue;
        }
        double mx = x->values[offsets[g]];
        for (std::size_t e = offsets[g] + 1; e < offsets[g + 1]; ++e)
            mx = std::max(mx, x->values[e]);
        double z = 0.0;
        for (std::size_t e = offsets[g]; e < offsets[g + 1]; ++e)
            z += std::exp(x->values[e] - mx);
        out->values[g] = mx + std::log(z);
    }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr px = x;
        out->backward_fn = [o, px, offsets, groups]() {
            px->ensure_grad();
            for (std::size_t g = 0; g < groups; ++g) {
                const double gr = o->grad[g];
                if (gr == 0.0) continue;
                for (std::size_t e = offsets[g]; e < offsets[g + 1]; ++e)
                    px->grad[e] += gr * std::exp(px->values[e] - o->values[g]);
            }
        };
    }
    return out;
}

TensorPtr pick(const TensorPtr& m, const std::vector<std::size_t>& cols) {
    if (m->shape.size() != 2 || cols.size() != m->rows())
        throw TensorError("pick: need one column index per row");
    const std::size_t n = m->rows(), d = m->cols();
    for (auto c : cols)
        if (c >= d) throw TensorError("pick: column index out of range");
    auto out = new_node({n}, n, {m});
    for (std::size_t r = 0; r < n; ++r) out->values[r] = m->values[r * d + cols[r]];
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pm = m;
        out->backward_fn = [o, pm, cols, d]() {
            pm->ensure_grad();
            for (std::size_t r = 0; r < cols.size(); ++r) pm->grad[r * d + cols[r]] += o->grad[r];
        };
    }
    return out;
}

// --- similarity and log-sum-exp ---

namespace {

// Shared cosine backward for a single (u, v) pair with cached norms.
inline void cosine_pair_backward(const double* u, const double* v, double nu, double nv,
                                 double c, double g, double* du, double* dv, std::size_t d) {
    if (nu == 0.0 || nv == 0.0) return;  // similarity defined as 0, gradient 0
    const double inv = 1.0 / (nu * nv);
    if (du)
        for (std::size_t k = 0; k < d; ++k) du[k] += g * (v[k] * inv - c * u[k] / (nu * nu));
    if (dv)
        for (std::size_t k = 0; k < d; ++k) dv[k] += g * (u[k] * inv - c * v[k] / (nv * nv));
}

std::vector<double> row_norms(const Tensor& m) {
    const std::size_t n = m.rows(), d = m.cols();
    std::vector<double> out(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += m.values[r * d + c] * m.values[r * d + c];
        out[r] = std::sqrt(s);
    }
    return out;
}

}  // namespace

TensorPtr cosine_matrix(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape.size() != 2 || b->shape.size() != 2 || a->cols() != b->cols())
        throw TensorError("cosine_matrix: incompatible shapes");
    const std::size_t n = a->rows(), m = b->rows(), d = a->cols();
    auto na = row_norms(*a);
    auto nb = row_norms(*b);
    auto out = new_node({n, m}, n * m, {a, b});
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < m; ++c) {
            if (na[r] == 0.0 || nb[c] == 0.0) continue;
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += a->values[r * d + k] * b->values[c * d + k];
            out->values[r * m + c] = dot / (na[r] * nb[c]);
        }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a, pb = b;
        out->backward_fn = [o, pa, pb, na = std::move(na), nb = std::move(nb), n, m, d]() {
            if (pa->requires_grad) pa->ensure_grad();
            if (pb->requires_grad) pb->ensure_grad();
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < m; ++c) {
                    const double g = o->grad[r * m + c];
                    if (g == 0.0) continue;
                    cosine_pair_backward(&pa->values[r * d], &pb->values[c * d], na[r], nb[c],
                                         o->values[r * m + c], g,
                                         pa->requires_grad ? &pa->grad[r * d] : nullptr,
                                         pb->requires_grad ? &pb->grad[c * d] : nullptr, d);
                }
        };
    }
    return out;
}

TensorPtr cosine_rows(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape(*a, *b, "cosine_rows");
    if (a->shape.size() != 2) throw TensorError("cosine_rows: need matrices");
    const std::size_t n = a->rows(), d = a->cols();
    auto na = row_norms(*a);
    auto nb = row_norms(*b);
    auto out = new_node({n}, n, {a, b});
    for (std::size_t r = 0; r < n; ++r) {
        if (na[r] == 0.0 || nb[r] == 0.0) continue;
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += a->values[r * d + k] * b->values[r * d + k];
        out->values[r] = dot / (na[r] * nb[r]);
    }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a, pb = b;
        out->backward_fn = [o, pa, pb, na = std::move(na), nb = std::move(nb), n, d]() {
            if (pa->requires_grad) pa->ensure_grad();
            if (pb->requires_grad) pb->ensure_grad();
            for (std::size_t r = 0; r < n; ++r) {
                const double g = o->grad[r];
                if (g == 0.0) continue;
                cosine_pair_backward(&pa->values[r * d], &pb->values[r * d], na[r], nb[r],
                                     o->values[r], g,
                                     pa->requires_grad ? &pa->grad[r * d] : nullptr,
                                     pb->requires_grad ? &pb->grad[r * d] : nullptr, d);
            }
        };
    }
    return out;
}

TensorPtr masked_logsumexp_rows(const TensorPtr& m, const std::vector<std::vector<int>>& cols) {
    if (m->shape.size() != 2 || cols.size() != m->rows())
        throw TensorError("masked_logsumexp_rows: need one column list per row");
    const std::size_t n = m->rows(), d = m->cols();
    auto out = new_node({n}, n, {m});
    for (std::size_t r = 0; r < n; ++r) {
        const auto& cl = cols[r];
        if (cl.empty()) throw TensorError("masked_logsumexp_rows: empty mask in row " + std::to_string(r));
        double mx = -std::numeric_limits<double>::infinity();
        for (int c : cl) {
            if (c < 0 || static_cast<std::size_t>(c) >= d)
                throw TensorError("masked_logsumexp_rows: column out of range");
            mx = std::max(mx, m->values[r * d + c]);
        }
        double z = 0.0;
        for (int c : cl) z += std::exp(m->values[r * d + c] - mx);
        out->values[r] = mx + std::log(z);
    }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pm = m;
        out->backward_fn = [o, pm, cols, d]() {
            pm->ensure_grad();
            for (std::size_t r = 0; r < cols.size(); ++r) {
                const double g = o->grad[r];
                if (g == 0.0) continue;
                for (int c : cols[r])
                    pm->grad[r * d + c] += g * std::exp(pm->values[r * d + c] - o->values[r]);
            }
        };
    }
    return out;
}

TensorPtr logsumexp_rows(const TensorPtr& m) {
    std::vector<std::vector<int>> cols(m->rows());
    for (auto& cl : cols) {
        cl.resize(m->cols());
        for (std::size_t c = 0; c < m->cols(); ++c) cl[c] = static_cast<int>(c);
    }
    return masked_logsumexp_rows(m, cols);
}

TensorPtr lse_merge(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape(*a, *b, "lse_merge");
    auto out = new_node(a->shape, a->numel(), {a, b});
    for (std::size_t i = 0; i < a->numel(); ++i) {
        const double mx = std::max(a->values[i], b->values[i]);
        out->values[i] =
            mx + std::log(std::exp(a->values[i] - mx) + std::exp(b->values[i] - mx));
    }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr pa = a, pb = b;
        out->backward_fn = [o, pa, pb]() {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < o->grad.size(); ++i)
                    pa->grad[i] += o->grad[i] * std::exp(pa->values[i] - o->values[i]);
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < o->grad.size(); ++i)
                    pb->grad[i] += o->grad[i] * std::exp(pb->values[i] - o->values[i]);
            }
        };
    }
    return out;
}

TensorPtr spmm(const SparseOp& s, const TensorPtr& h) {
    if (h->shape.size() != 2 || h->rows() != s.n) throw TensorError("spmm: row count mismatch");
    const std::size_t d = h->cols();
    auto out = new_node({s.n, d}, s.n * d, {h});
    for (std::size_t r = 0; r < s.n; ++r)
        for (std::size_t e = s.row_ptr[r]; e < s.row_ptr[r + 1]; ++e) {
            const double we = s.w[e];
            const std::size_t c = s.col[e];
            for (std::size_t k = 0; k < d; ++k) out->values[r * d + k] += we * h->values[c * d + k];
        }
    if (out->requires_grad) {
        Tensor* o = out.get();
        TensorPtr ph = h;
        // dH = Sᵀ·G, scattered entry by entry
        out->backward_fn = [o, ph, s, d]() {
            ph->ensure_grad();
            for (std::size_t r = 0; r < s.n; ++r)
                for (std::size_t e = s.row_ptr[r]; e < s.row_ptr[r + 1]; ++e) {
                    const double we = s.w[e];
                    const std::size_t c = s.col[e];
                    for (std::size_t k = 0; k < d; ++k)
                        ph->grad[c * d + k] += we * o->grad[r * d + k];
                }
        };
    }
    return out;
}

void backward(const TensorPtr& loss) {
    if (!loss->is_scalar()) throw UsageError("backward requires a scalar loss");
    if (!loss->requires_grad) throw UsageError("backward on a tensor with no tracked inputs");

    // Iterative DFS postorder over tracked nodes.
    std::vector<Tensor*> order;
    std::unordered_set<Tensor*> visited;
    std::vector<std::pair<Tensor*, std::size_t>> stack{{loss.get(), 0}};
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Tensor* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor* node = *it;
        if (node->backward_fn) {
            node->ensure_grad();
            node->backward_fn();
        }
    }
}

}  // namespace heco
