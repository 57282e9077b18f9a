#include "gpd/params.hpp"

#include <cmath>

#include "gpd/common.hpp"

namespace gpd {

Param& ParamStore::add(const std::string& name, Matrix init) {
    if (has(name)) throw ValidationError("duplicate parameter name: " + name);
    entries_.push_back(std::make_unique<Param>(name, std::move(init)));
    return *entries_.back();
}

Param& ParamStore::at(const std::string& name) {
    for (auto& p : entries_)
        if (p->name == name) return *p;
    throw ValidationError("unknown parameter: " + name);
}

const Param& ParamStore::at(const std::string& name) const {
    for (const auto& p : entries_)
        if (p->name == name) return *p;
    throw ValidationError("unknown parameter: " + name);
}

bool ParamStore::has(const std::string& name) const {
    for (const auto& p : entries_)
        if (p->name == name) return true;
    return false;
}

size_t ParamStore::total_size() const {
    size_t n = 0;
    for (const auto& p : entries_) n += p->value.size();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& p : entries_) p->grad.fill(0.0);
}

void ParamStore::scale_grads(double s) {
    for (auto& p : entries_)
        for (double& g : p->grad.a) g *= s;
}

std::vector<double> ParamStore::flatten_values() const {
    std::vector<double> flat;
    flat.reserve(total_size());
    for (const auto& p : entries_)
        flat.insert(flat.end(), p->value.a.begin(), p->value.a.end());
    return flat;
}

void ParamStore::load_values(const std::vector<double>& flat) {
    if (flat.size() != total_size())
        throw ValidationError("flat parameter length " + std::to_string(flat.size()) +
                              " does not match store size " + std::to_string(total_size()));
    size_t off = 0;
    for (auto& p : entries_) {
        std::copy(flat.begin() + off, flat.begin() + off + p->value.size(), p->value.a.begin());
        off += p->value.size();
    }
}

void AdamOptimizer::step(ParamStore& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& p : params.entries()) {
        double* w = p->value.data();
        const double* g = p->grad.data();
        double* m = p->adam_m.data();
        double* v = p->adam_v.data();
        const size_t n = p->value.size();
        for (size_t i = 0; i < n; ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            w[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
        }
    }
}

double AdamOptimizer::clip_grad_norm(ParamStore& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params.entries())
        for (double g : p->grad.a) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / norm;
        for (auto& p : params.entries())
            for (double& g : p->grad.a) g *= scale;
    }
    return norm;
}

}  // namespace gpd
