#pragma once

#include <cmath>
#include <vector>

#include "synthdet/nn/layers.hpp"

namespace synthdet::nn {

template <typename T = float>
class Adam {
  public:
    Adam(std::vector<Param<T>*> params, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (auto* p : params_) {
            m_.emplace_back(p->w.size(), 0.0);
            v_.emplace_back(p->w.size(), 0.0);
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->zero_grad();
    }

    void step(double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (size_t pi = 0; pi < params_.size(); ++pi) {
            auto& w = params_[pi]->w;
            auto& g = params_[pi]->g;
            auto& m = m_[pi];
            auto& v = v_[pi];
            for (size_t i = 0; i < w.size(); ++i) {
                const double gi = static_cast<double>(g[i]);
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
                const double mh = m[i] / bc1;
                const double vh = v[i] / bc2;
                w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * mh / (std::sqrt(vh) + eps_));
            }
        }
    }

    long step_count() const { return t_; }

  private:
    std::vector<Param<T>*> params_;
    double beta1_, beta2_, eps_;
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
};

}  // namespace synthdet::nn
