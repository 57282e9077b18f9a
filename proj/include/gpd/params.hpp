#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gpd/matrix.hpp"

namespace gpd {

// One named trainable tensor with its gradient and optimizer state.
struct Param {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix adam_m;
    Matrix adam_v;

    Param(std::string n, Matrix v)
        : name(std::move(n)),
          value(std::move(v)),
          grad(value.rows, value.cols),
          adam_m(value.rows, value.cols),
          adam_v(value.rows, value.cols) {}
};

// Ordered collection of parameters. Insertion order defines the flat layout.
class ParamStore {
  public:
    Param& add(const std::string& name, Matrix init);
    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    bool has(const std::string& name) const;

    std::vector<std::unique_ptr<Param>>& entries() { return entries_; }
    const std::vector<std::unique_ptr<Param>>& entries() const { return entries_; }

    size_t total_size() const;
    void zero_grad();
    void scale_grads(double s);

    // Row-major per tensor, insertion order.
    std::vector<double> flatten_values() const;
    void load_values(const std::vector<double>& flat);

  private:
    std::vector<std::unique_ptr<Param>> entries_;
};

class AdamOptimizer {
  public:
    explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // One update from the gradients currently held in the store. Grads are
    // left untouched; callers zero them before the next accumulation.
    void step(ParamStore& params);

    // Scales grads so their global L2 norm is at most max_norm. Returns the
    // pre-clip norm.
    static double clip_grad_norm(ParamStore& params, double max_norm);

    long step_count() const { return t_; }

  private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace gpd
