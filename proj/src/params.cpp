#include "heco/params.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "heco/errors.hpp"

namespace heco {

TensorPtr glorot_init(std::size_t fan_out, std::size_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> v(fan_out * fan_in);
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return make_matrix(fan_out, fan_in, std::move(v), true);
}

TensorPtr ParamStore::add(const std::string& label, TensorPtr t) {
    if (params_.count(label)) throw UsageError("parameter label not unique: " + label);
    t->requires_grad = true;
    params_[label] = t;
    auto& st = state_[label];
    st.m.assign(t->numel(), 0.0);
    st.v.assign(t->numel(), 0.0);
    return t;
}

const TensorPtr& ParamStore::get(const std::string& label) const {
    auto it = params_.find(label);
    if (it == params_.end()) throw UsageError("unknown parameter: " + label);
    return it->second;
}

std::vector<std::pair<std::string, TensorPtr>> ParamStore::items(const std::string& prefix) const {
    std::vector<std::pair<std::string, TensorPtr>> out;
    for (const auto& [label, t] : params_)
        if (label.rfind(prefix, 0) == 0) out.emplace_back(label, t);
    return out;
}

void ParamStore::backward(const TensorPtr& loss) {
    heco::backward(loss);
    backward_seen_ = true;
}

void ParamStore::adam_step(double lr, const AdamSettings& adam, const std::string& prefix) {
    if (!backward_seen_) throw UsageError("adam_step before any backward pass");
    for (auto& [label, t] : params_) {
        if (label.rfind(prefix, 0) != 0) continue;
        auto& st = state_[label];
        ++st.step;
        const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(st.step));
        const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(st.step));
        t->ensure_grad();
        for (std::size_t i = 0; i < t->numel(); ++i) {
            const double g = t->grad[i];
            st.m[i] = adam.beta1 * st.m[i] + (1.0 - adam.beta1) * g;
            st.v[i] = adam.beta2 * st.v[i] + (1.0 - adam.beta2) * g * g;
            const double mhat = st.m[i] / bc1;
            const double vhat = st.v[i] / bc2;
            t->values[i] -= lr * mhat / (std::sqrt(vhat) + adam.eps);
        }
        t->zero_grad();
    }
}

void ParamStore::zero_grad() {
    for (auto& [label, t] : params_) t->zero_grad();
}

std::map<std::string, std::vector<double>> ParamStore::snapshot_values() const {
    std::map<std::string, std::vector<double>> snap;
    for (const auto& [label, t] : params_) snap[label] = t->values;
    return snap;
}

void ParamStore::restore_values(const std::map<std::string, std::vector<double>>& snap) {
    for (auto& [label, t] : params_) {
        auto it = snap.find(label);
        if (it == snap.end() || it->second.size() != t->numel())
            throw UsageError("snapshot does not match parameter " + label);
        t->values = it->second;
    }
}

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void ParamStore::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out << "heco-checkpoint v1\n";
    for (const auto& [label, t] : params_) {
        out << "param " << label << " " << t->shape.size();
        for (auto d : t->shape) out << " " << d;
        out << "\n";
        for (std::size_t i = 0; i < t->numel(); ++i) {
            if (i) out << " ";
            out << fmt_double(t->values[i]);
        }
        out << "\n";
    }
}

void ParamStore::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read checkpoint: " + path);
    std::string header;
    std::getline(in, header);
    if (header != "heco-checkpoint v1")
        throw DataError("checkpoint format version mismatch in " + path + ": '" + header + "'");
    std::string line;
    std::set<std::string> loaded;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream hs(line);
        std::string kw, label;
        std::size_t rank;
        if (!(hs >> kw >> label >> rank) || kw != "param")
            throw DataError("malformed checkpoint record: '" + line + "'");
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape)
            if (!(hs >> d)) throw DataError("malformed checkpoint shape for " + label);
        auto it = params_.find(label);
        if (it == params_.end()) throw DataError("checkpoint has unknown parameter " + label);
        if (it->second->shape != shape) throw DataError("checkpoint shape mismatch for " + label);
        if (!loaded.insert(label).second)
            throw DataError("checkpoint lists parameter " + label + " twice");
        if (!std::getline(in, line)) throw DataError("missing values for " + label);
        std::istringstream vs(line);
        for (std::size_t i = 0; i < it->second->numel(); ++i)
            if (!(vs >> it->second->values[i]))
                throw DataError("bad value in checkpoint for " + label);
    }
    if (loaded.size() != params_.size())
        throw DataError("checkpoint parameter count mismatch: got " + std::to_string(loaded.size()) +
                        ", expected " + std::to_string(params_.size()));
}

}  // namespace heco
