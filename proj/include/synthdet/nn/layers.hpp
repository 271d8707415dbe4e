#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "synthdet/core/random.hpp"
#include "synthdet/nn/tensor.hpp"

namespace synthdet::nn {

template <typename T>
struct Param {
    std::vector<T> w;
    std::vector<T> g;

    explicit Param(size_t size) : w(size, T(0)), g(size, T(0)) {}
    void zero_grad() { std::fill(g.begin(), g.end(), T(0)); }
};

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<Mat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const Mat<T>>;

template <typename T = float>
class Layer {
  public:
    virtual ~Layer() = default;
    virtual Tensor<T> forward(const Tensor<T>& x, bool train) = 0;
    virtual Tensor<T> backward(const Tensor<T>& gy) = 0;
    virtual void init(RandomStream&) {}
    virtual void collect_params(std::vector<Param<T>*>&) {}
    virtual void collect_buffers(std::vector<std::vector<T>*>&) {}
};

template <typename T = float>
class Conv2d : public Layer<T> {
  public:
    Conv2d(int cin, int cout, int kernel, int stride, int pad)
        : cin_(cin), cout_(cout), k_(kernel), s_(stride), p_(pad),
          weight_(static_cast<size_t>(cout) * cin * kernel * kernel), bias_(cout) {}

    void init(RandomStream& rng) override {
        const T scale = static_cast<T>(std::sqrt(2.0 / (static_cast<double>(cin_) * k_ * k_)));
        for (auto& w : weight_.w) w = static_cast<T>(rng.normal()) * scale;
        std::fill(bias_.w.begin(), bias_.w.end(), T(0));
    }

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        x_ = x;
        const int oh = out_dim(x.h), ow = out_dim(x.w);
        Tensor<T> y(x.n, cout_, oh, ow);
        const int patch = cin_ * k_ * k_;
        std::vector<T> cols(static_cast<size_t>(patch) * oh * ow);
        ConstMatMap<T> wm(weight_.w.data(), cout_, patch);
        for (int i = 0; i < x.n; ++i) {
            im2col(x, i, oh, ow, cols.data());
            ConstMatMap<T> cm(cols.data(), patch, static_cast<Eigen::Index>(oh) * ow);
            MatMap<T> ym(y.sample(i), cout_, static_cast<Eigen::Index>(oh) * ow);
            ym.noalias() = wm * cm;
            for (int co = 0; co < cout_; ++co) ym.row(co).array() += bias_.w[co];
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        const int oh = gy.h, ow = gy.w;
        const int patch = cin_ * k_ * k_;
        Tensor<T> gx(x_.n, cin_, x_.h, x_.w);
        std::vector<T> cols(static_cast<size_t>(patch) * oh * ow);
        std::vector<T> gcols(cols.size());
        ConstMatMap<T> wm(weight_.w.data(), cout_, patch);
        MatMap<T> gwm(weight_.g.data(), cout_, patch);
        for (int i = 0; i < gy.n; ++i) {
            im2col(x_, i, oh, ow, cols.data());
            ConstMatMap<T> cm(cols.data(), patch, static_cast<Eigen::Index>(oh) * ow);
            ConstMatMap<T> gym(gy.sample(i), cout_, static_cast<Eigen::Index>(oh) * ow);
            gwm.noalias() += gym * cm.transpose();
            for (int co = 0; co < cout_; ++co) bias_.g[co] += gym.row(co).sum();
            MatMap<T> gcm(gcols.data(), patch, static_cast<Eigen::Index>(oh) * ow);
            gcm.noalias() = wm.transpose() * gym;
            col2im(gcols.data(), i, oh, ow, gx);
        }
        return gx;
    }

    void collect_params(std::vector<Param<T>*>& out) override {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

  private:
    int out_dim(int d) const { return (d + 2 * p_ - k_) / s_ + 1; }

    void im2col(const Tensor<T>& x, int i, int oh, int ow, T* cols) const {
        size_t idx = 0;
        for (int ci = 0; ci < cin_; ++ci)
            for (int ky = 0; ky < k_; ++ky)
                for (int kx = 0; kx < k_; ++kx)
                    for (int oy = 0; oy < oh; ++oy) {
                        const int sy = oy * s_ - p_ + ky;
                        for (int ox = 0; ox < ow; ++ox, ++idx) {
                            const int sx = ox * s_ - p_ + kx;
                            cols[idx] = (sy >= 0 && sy < x.h && sx >= 0 && sx < x.w)
                                            ? x.at(i, ci, sy, sx)
                                            : T(0);
                        }
                    }
    }

    void col2im(const T* gcols, int i, int oh, int ow, Tensor<T>& gx) const {
        size_t idx = 0;
        for (int ci = 0; ci < cin_; ++ci)
            for (int ky = 0; ky < k_; ++ky)
                for (int kx = 0; kx < k_; ++kx)
                    for (int oy = 0; oy < oh; ++oy) {
                        const int sy = oy * s_ - p_ + ky;
                        for (int ox = 0; ox < ow; ++ox, ++idx) {
                            const int sx = ox * s_ - p_ + kx;
                            if (sy >= 0 && sy < gx.h && sx >= 0 && sx < gx.w)
                                gx.at(i, ci, sy, sx) += gcols[idx];
                        }
                    }
    }

    int cin_, cout_, k_, s_, p_;
    Param<T> weight_, bias_;
    Tensor<T> x_;
};

template <typename T = float>
class LeakyReLU : public Layer<T> {
  public:
    explicit LeakyReLU(T slope = T(0)) : slope_(slope) {}

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        x_ = x;
        Tensor<T> y = x;
        for (auto& v : y.v)
            if (v < T(0)) v *= slope_;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        Tensor<T> gx = gy;
        for (size_t i = 0; i < gx.v.size(); ++i)
            if (x_.v[i] < T(0)) gx.v[i] *= slope_;
        return gx;
    }

  private:
    T slope_;
    Tensor<T> x_;
};

template <typename T = float>
class ReLU : public LeakyReLU<T> {
  public:
    ReLU() : LeakyReLU<T>(T(0)) {}
};

template <typename T = float>
class MaxPool2d : public Layer<T> {
  public:
    MaxPool2d(int kernel, int stride, int pad = 0) : k_(kernel), s_(stride), p_(pad) {}

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        in_n_ = x.n; in_c_ = x.c; in_h_ = x.h; in_w_ = x.w;
        const int oh = (x.h + 2 * p_ - k_) / s_ + 1;
        const int ow = (x.w + 2 * p_ - k_) / s_ + 1;
        Tensor<T> y(x.n, x.c, oh, ow);
        arg_.assign(y.size(), 0);
        size_t idx = 0;
        for (int i = 0; i < x.n; ++i)
            for (int ci = 0; ci < x.c; ++ci)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox, ++idx) {
                        T best = -std::numeric_limits<T>::infinity();
                        size_t bi = 0;
                        for (int ky = 0; ky < k_; ++ky) {
                            const int sy = oy * s_ - p_ + ky;
                            if (sy < 0 || sy >= x.h) continue;
                            for (int kx = 0; kx < k_; ++kx) {
                                const int sx = ox * s_ - p_ + kx;
                                if (sx < 0 || sx >= x.w) continue;
                                const T v = x.at(i, ci, sy, sx);
                                if (v > best) {
                                    best = v;
                                    bi = ((static_cast<size_t>(i) * x.c + ci) * x.h + sy) * x.w + sx;
                                }
                            }
                        }
                        y.v[idx] = best;
                        arg_[idx] = bi;
                    }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        Tensor<T> gx(in_n_, in_c_, in_h_, in_w_);
        for (size_t i = 0; i < gy.v.size(); ++i) gx.v[arg_[i]] += gy.v[i];
        return gx;
    }

  private:
    int k_, s_, p_;
    int in_n_ = 0, in_c_ = 0, in_h_ = 0, in_w_ = 0;
    std::vector<size_t> arg_;
};

template <typename T = float>
class GlobalAvgPool : public Layer<T> {
  public:
    Tensor<T> forward(const Tensor<T>& x, bool) override {
        in_h_ = x.h; in_w_ = x.w;
        Tensor<T> y(x.n, x.c, 1, 1);
        const T inv = T(1) / static_cast<T>(x.h * x.w);
        for (int i = 0; i < x.n; ++i)
            for (int ci = 0; ci < x.c; ++ci) {
                T acc = T(0);
                for (int yy = 0; yy < x.h; ++yy)
                    for (int xx = 0; xx < x.w; ++xx) acc += x.at(i, ci, yy, xx);
                y.at(i, ci, 0, 0) = acc * inv;
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        Tensor<T> gx(gy.n, gy.c, in_h_, in_w_);
        const T inv = T(1) / static_cast<T>(in_h_ * in_w_);
        for (int i = 0; i < gy.n; ++i)
            for (int ci = 0; ci < gy.c; ++ci) {
                const T g = gy.at(i, ci, 0, 0) * inv;
                for (int yy = 0; yy < in_h_; ++yy)
                    for (int xx = 0; xx < in_w_; ++xx) gx.at(i, ci, yy, xx) = g;
            }
        return gx;
    }

  private:
    int in_h_ = 0, in_w_ = 0;
};

template <typename T = float>
class Upsample2x : public Layer<T> {
  public:
    Tensor<T> forward(const Tensor<T>& x, bool) override {
        in_h_ = x.h;
        in_w_ = x.w;
        Tensor<T> y(x.n, x.c, x.h * 2, x.w * 2);
        for (int i = 0; i < x.n; ++i)
            for (int ci = 0; ci < x.c; ++ci)
                for (int yy = 0; yy < y.h; ++yy)
                    for (int xx = 0; xx < y.w; ++xx)
                        y.at(i, ci, yy, xx) = x.at(i, ci, yy / 2, xx / 2);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        Tensor<T> gx(gy.n, gy.c, in_h_, in_w_);
        for (int i = 0; i < gy.n; ++i)
            for (int ci = 0; ci < gy.c; ++ci)
                for (int yy = 0; yy < gy.h; ++yy)
                    for (int xx = 0; xx < gy.w; ++xx)
                        gx.at(i, ci, yy / 2, xx / 2) += gy.at(i, ci, yy, xx);
        return gx;
    }

  private:
    int in_h_ = 0, in_w_ = 0;
};

template <typename T = float>
class Linear : public Layer<T> {
  public:
    Linear(int cin, int cout, bool zero_init = false)
        : cin_(cin), cout_(cout), zero_init_(zero_init),
          weight_(static_cast<size_t>(cout) * cin), bias_(cout) {}

    void init(RandomStream& rng) override {
        if (zero_init_) {
            std::fill(weight_.w.begin(), weight_.w.end(), T(0));
        } else {
            const T scale = static_cast<T>(std::sqrt(2.0 / cin_));
            for (auto& w : weight_.w) w = static_cast<T>(rng.normal()) * scale;
        }
        std::fill(bias_.w.begin(), bias_.w.end(), T(0));
    }

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        x_ = x;
        Tensor<T> y(x.n, cout_, 1, 1);
        ConstMatMap<T> wm(weight_.w.data(), cout_, cin_);
        for (int i = 0; i < x.n; ++i) {
            Eigen::Map<const Eigen::Vector<T, Eigen::Dynamic>> xv(x.sample(i), cin_);
            Eigen::Map<Eigen::Vector<T, Eigen::Dynamic>> yv(y.sample(i), cout_);
            yv.noalias() = wm * xv;
            for (int co = 0; co < cout_; ++co) yv[co] += bias_.w[co];
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        Tensor<T> gx(x_.n, cin_, 1, 1);
        ConstMatMap<T> wm(weight_.w.data(), cout_, cin_);
        MatMap<T> gwm(weight_.g.data(), cout_, cin_);
        for (int i = 0; i < gy.n; ++i) {
            Eigen::Map<const Eigen::Vector<T, Eigen::Dynamic>> gv(gy.sample(i), cout_);
            Eigen::Map<const Eigen::Vector<T, Eigen::Dynamic>> xv(x_.sample(i), cin_);
            Eigen::Map<Eigen::Vector<T, Eigen::Dynamic>> gxv(gx.sample(i), cin_);
            gwm.noalias() += gv * xv.transpose();
            for (int co = 0; co < cout_; ++co) bias_.g[co] += gv[co];
            gxv.noalias() = wm.transpose() * gv;
        }
        return gx;
    }

    void collect_params(std::vector<Param<T>*>& out) override {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

  private:
    int cin_, cout_;
    bool zero_init_;
    Param<T> weight_, bias_;
    Tensor<T> x_;
};

template <typename T = float>
class BatchNorm2d : public Layer<T> {
  public:
    explicit BatchNorm2d(int c, T momentum = T(0.1), T eps = T(1e-5))
        : c_(c), momentum_(momentum), eps_(eps), gamma_(c), beta_(c),
          running_mean_(c, T(0)), running_var_(c, T(1)) {}

    void init(RandomStream&) override {
        std::fill(gamma_.w.begin(), gamma_.w.end(), T(1));
        std::fill(beta_.w.begin(), beta_.w.end(), T(0));
        std::fill(running_mean_.begin(), running_mean_.end(), T(0));
        std::fill(running_var_.begin(), running_var_.end(), T(1));
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) override {
        Tensor<T> y(x.n, x.c, x.h, x.w);
        const size_t m = static_cast<size_t>(x.n) * x.h * x.w;
        if (train) {
            train_ = true;
            mean_.assign(c_, T(0));
            inv_std_.assign(c_, T(0));
            xhat_ = Tensor<T>(x.n, x.c, x.h, x.w);
            for (int ci = 0; ci < c_; ++ci) {
                T mu = T(0);
                for (int i = 0; i < x.n; ++i)
                    for (int yy = 0; yy < x.h; ++yy)
                        for (int xx = 0; xx < x.w; ++xx) mu += x.at(i, ci, yy, xx);
                mu /= static_cast<T>(m);
                T var = T(0);
                for (int i = 0; i < x.n; ++i)
                    for (int yy = 0; yy < x.h; ++yy)
                        for (int xx = 0; xx < x.w; ++xx) {
                            const T d = x.at(i, ci, yy, xx) - mu;
                            var += d * d;
                        }
                var /= static_cast<T>(m);
                mean_[ci] = mu;
                inv_std_[ci] = T(1) / std::sqrt(var + eps_);
                running_mean_[ci] = (T(1) - momentum_) * running_mean_[ci] + momentum_ * mu;
                running_var_[ci] = (T(1) - momentum_) * running_var_[ci] + momentum_ * var;
                for (int i = 0; i < x.n; ++i)
                    for (int yy = 0; yy < x.h; ++yy)
                        for (int xx = 0; xx < x.w; ++xx) {
                            const T xh = (x.at(i, ci, yy, xx) - mu) * inv_std_[ci];
                            xhat_.at(i, ci, yy, xx) = xh;
                            y.at(i, ci, yy, xx) = gamma_.w[ci] * xh + beta_.w[ci];
                        }
            }
        } else {
            train_ = false;
            xhat_ = Tensor<T>(x.n, x.c, x.h, x.w);
            for (int ci = 0; ci < c_; ++ci) {
                const T inv = T(1) / std::sqrt(running_var_[ci] + eps_);
                for (int i = 0; i < x.n; ++i)
                    for (int yy = 0; yy < x.h; ++yy)
                        for (int xx = 0; xx < x.w; ++xx) {
                            const T xh = (x.at(i, ci, yy, xx) - running_mean_[ci]) * inv;
                            xhat_.at(i, ci, yy, xx) = xh;
                            y.at(i, ci, yy, xx) = gamma_.w[ci] * xh + beta_.w[ci];
                        }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        Tensor<T> gx(gy.n, gy.c, gy.h, gy.w);
        if (!train_) {
            for (int ci = 0; ci < c_; ++ci) {
                const T g = gamma_.w[ci] / std::sqrt(running_var_[ci] + eps_);
                for (int i = 0; i < gy.n; ++i)
                    for (int yy = 0; yy < gy.h; ++yy)
                        for (int xx = 0; xx < gy.w; ++xx) {
                            const T go = gy.at(i, ci, yy, xx);
                            gamma_.g[ci] += go * xhat_.at(i, ci, yy, xx);
                            beta_.g[ci] += go;
                            gx.at(i, ci, yy, xx) = go * g;
                        }
            }
            return gx;
        }
        const T m = static_cast<T>(static_cast<size_t>(gy.n) * gy.h * gy.w);
        for (int ci = 0; ci < c_; ++ci) {
            T sum_g = T(0), sum_gx = T(0);
            for (int i = 0; i < gy.n; ++i)
                for (int yy = 0; yy < gy.h; ++yy)
                    for (int xx = 0; xx < gy.w; ++xx) {
                        const T g = gy.at(i, ci, yy, xx);
                        sum_g += g;
                        sum_gx += g * xhat_.at(i, ci, yy, xx);
                    }
            gamma_.g[ci] += sum_gx;
            beta_.g[ci] += sum_g;
            const T scale = gamma_.w[ci] * inv_std_[ci] / m;
            for (int i = 0; i < gy.n; ++i)
                for (int yy = 0; yy < gy.h; ++yy)
                    for (int xx = 0; xx < gy.w; ++xx)
                        gx.at(i, ci, yy, xx) =
                            scale * (m * gy.at(i, ci, yy, xx) - sum_g -
                                     xhat_.at(i, ci, yy, xx) * sum_gx);
        }
        return gx;
    }

    void collect_params(std::vector<Param<T>*>& out) override {
        out.push_back(&gamma_);
        out.push_back(&beta_);
    }

    void collect_buffers(std::vector<std::vector<T>*>& out) override {
        out.push_back(&running_mean_);
        out.push_back(&running_var_);
    }

    std::vector<T>& running_mean() { return running_mean_; }
    std::vector<T>& running_var() { return running_var_; }

  private:
    int c_;
    T momentum_, eps_;
    Param<T> gamma_, beta_;
    std::vector<T> running_mean_, running_var_;
    std::vector<T> mean_, inv_std_;
    Tensor<T> xhat_;
    bool train_ = false;
};

template <typename T = float>
class Sequential : public Layer<T> {
  public:
    Sequential() = default;

    template <typename L, typename... Args>
    L* add(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L* raw = layer.get();
        layers_.push_back(std::move(layer));
        return raw;
    }

    void push(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

    Tensor<T> forward(const Tensor<T>& x, bool train) override {
        Tensor<T> cur = x;
        for (auto& l : layers_) cur = l->forward(cur, train);
        return cur;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        Tensor<T> cur = gy;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
        return cur;
    }

    void init(RandomStream& rng) override {
        for (auto& l : layers_) l->init(rng);
    }

    void collect_params(std::vector<Param<T>*>& out) override {
        for (auto& l : layers_) l->collect_params(out);
    }

    void collect_buffers(std::vector<std::vector<T>*>& out) override {
        for (auto& l : layers_) l->collect_buffers(out);
    }

    size_t layer_count() const { return layers_.size(); }

  private:
    std::vector<std::unique_ptr<Layer<T>>> layers_;
};

// y = relu(main(x) + shortcut(x)); empty shortcut means identity.
template <typename T = float>
class ResidualBlock : public Layer<T> {
  public:
    ResidualBlock(std::unique_ptr<Layer<T>> main, std::unique_ptr<Layer<T>> shortcut = nullptr)
        : main_(std::move(main)), shortcut_(std::move(shortcut)) {}

    Tensor<T> forward(const Tensor<T>& x, bool train) override {
        Tensor<T> a = main_->forward(x, train);
        Tensor<T> b = shortcut_ ? shortcut_->forward(x, train) : x;
        if (!a.same_shape(b)) throw StageError("residual branch shape mismatch");
        Tensor<T> y(a.n, a.c, a.h, a.w);
        for (size_t i = 0; i < y.v.size(); ++i) y.v[i] = a.v[i] + b.v[i];
        pre_relu_ = y;
        for (auto& v : y.v)
            if (v < T(0)) v = T(0);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        Tensor<T> g = gy;
        for (size_t i = 0; i < g.v.size(); ++i)
            if (pre_relu_.v[i] < T(0)) g.v[i] = T(0);
        Tensor<T> gx = main_->backward(g);
        if (shortcut_) {
            Tensor<T> gs = shortcut_->backward(g);
            for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += gs.v[i];
        } else {
            for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += g.v[i];
        }
        return gx;
    }

    void init(RandomStream& rng) override {
        main_->init(rng);
        if (shortcut_) shortcut_->init(rng);
    }

    void collect_params(std::vector<Param<T>*>& out) override {
        main_->collect_params(out);
        if (shortcut_) shortcut_->collect_params(out);
    }

    void collect_buffers(std::vector<std::vector<T>*>& out) override {
        main_->collect_buffers(out);
        if (shortcut_) shortcut_->collect_buffers(out);
    }

  private:
    std::unique_ptr<Layer<T>> main_, shortcut_;
    Tensor<T> pre_relu_;
};

}  // namespace synthdet::nn
