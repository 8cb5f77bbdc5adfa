#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace realdrl {

enum class OutputAct { Tanh, Linear };

// Fully connected rectifier network; columns of the input are samples.
template <class S>
class Mlp {
public:
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

    struct Cache {
        std::vector<Mat> act;  // act[0] is the input, act[k+1] the output of layer k
    };

    struct Grads {
        std::vector<Mat> W;
        std::vector<Vec> b;
    };

    Mlp() = default;

    template <class Rng>
    Mlp(const std::vector<int>& widths, OutputAct out, Rng& rng, double final_scale = 3e-3)
        : widths_(widths), out_(out) {
        if (widths.size() < 2) throw std::invalid_argument("Mlp: need at least input and output widths");
        for (size_t k = 0; k + 1 < widths.size(); ++k) {
            const int fan_in = widths[k], fan_out = widths[k + 1];
            const bool last = k + 2 == widths.size();
            const double lim = last ? final_scale : 1.0 / std::sqrt(static_cast<double>(fan_in));
            std::uniform_real_distribution<double> u(-lim, lim);
            Mat w(fan_out, fan_in);
            Vec bias(fan_out);
            for (int i = 0; i < fan_out; ++i) {
                for (int j = 0; j < fan_in; ++j) w(i, j) = static_cast<S>(u(rng));
                bias[i] = static_cast<S>(u(rng));
            }
            W.push_back(std::move(w));
            b.push_back(std::move(bias));
        }
    }

    int layers() const { return static_cast<int>(W.size()); }
    int input_dim() const { return widths_.front(); }
    int output_dim() const { return widths_.back(); }
    const std::vector<int>& widths() const { return widths_; }
    OutputAct output_act() const { return out_; }

    Mat forward(const Mat& x, Cache* cache = nullptr) const {
        if (x.rows() != input_dim()) throw std::invalid_argument("Mlp: input width mismatch");
        if (cache) {
            cache->act.clear();
            cache->act.push_back(x);
        }
        Mat h = x;
        for (int k = 0; k < layers(); ++k) {
            Mat z = W[static_cast<size_t>(k)] * h;
            z.colwise() += b[static_cast<size_t>(k)];
            if (k + 1 < layers())
                h = z.cwiseMax(S(0));
            else
                h = out_ == OutputAct::Tanh ? Mat(z.array().tanh()) : z;
            if (cache) cache->act.push_back(h);
        }
        return h;
    }

    // Backpropagates dL/dy; fills parameter gradients (when g is given), returns dL/dx.
    Mat backward(const Cache& cache, const Mat& dy, Grads* g = nullptr) const {
        const int L = layers();
        if (g) {
            g->W.resize(static_cast<size_t>(L));
            g->b.resize(static_cast<size_t>(L));
        }
        Mat delta = dy;
        const Mat& y = cache.act.back();
        if (out_ == OutputAct::Tanh) delta = (delta.array() * (S(1) - y.array().square())).matrix();
        for (int k = L - 1; k >= 0; --k) {
            const auto uk = static_cast<size_t>(k);
            const Mat& in = cache.act[uk];
            if (g) {
                g->W[uk] = delta * in.transpose();
                g->b[uk] = delta.rowwise().sum();
            }
            Mat dx = W[uk].transpose() * delta;
            if (k > 0) dx = (dx.array() * (in.array() > S(0)).template cast<S>()).matrix();
            delta = std::move(dx);
        }
        return delta;
    }

    void soft_update_from(const Mlp& src, S tau) {
        for (size_t k = 0; k < W.size(); ++k) {
            W[k] = tau * src.W[k] + (S(1) - tau) * W[k];
            b[k] = tau * src.b[k] + (S(1) - tau) * b[k];
        }
    }

    bool finite() const {
        for (size_t k = 0; k < W.size(); ++k)
            if (!W[k].allFinite() || !b[k].allFinite()) return false;
        return true;
    }

    std::vector<Mat> W;
    std::vector<Vec> b;

private:
    std::vector<int> widths_;
    OutputAct out_ = OutputAct::Linear;
};

template <class S>
class Adam {
public:
    Adam() = default;
    explicit Adam(const Mlp<S>& net, double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8)
        : lr_(lr), b1_(b1), b2_(b2), eps_(eps) {
        for (int k = 0; k < net.layers(); ++k) {
            const auto uk = static_cast<size_t>(k);
            mW_.push_back(Mat::Zero(net.W[uk].rows(), net.W[uk].cols()));
            vW_.push_back(mW_.back());
            mb_.push_back(Vec::Zero(net.b[uk].size()));
            vb_.push_back(mb_.back());
        }
    }

    void step(Mlp<S>& net, const typename Mlp<S>::Grads& g) {
        ++t_;
        const S c1 = static_cast<S>(1.0 - std::pow(b1_, t_));
        const S c2 = static_cast<S>(1.0 - std::pow(b2_, t_));
        const S b1 = static_cast<S>(b1_), b2 = static_cast<S>(b2_);
        const S lr = static_cast<S>(lr_), eps = static_cast<S>(eps_);
        for (size_t k = 0; k < mW_.size(); ++k) {
            mW_[k] = b1 * mW_[k] + (S(1) - b1) * g.W[k];
            vW_[k] = b2 * vW_[k] + (S(1) - b2) * g.W[k].cwiseAbs2();
            net.W[k].array() -= lr * (mW_[k].array() / c1) / ((vW_[k].array() / c2).sqrt() + eps);
            mb_[k] = b1 * mb_[k] + (S(1) - b1) * g.b[k];
            vb_[k] = b2 * vb_[k] + (S(1) - b2) * g.b[k].cwiseAbs2();
            net.b[k].array() -= lr * (mb_[k].array() / c1) / ((vb_[k].array() / c2).sqrt() + eps);
        }
    }

private:
    using Mat = typename Mlp<S>::Mat;
    using Vec = typename Mlp<S>::Vec;
    double lr_ = 1e-3, b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
    int t_ = 0;
    std::vector<Mat> mW_, vW_;
    std::vector<Vec> mb_, vb_;
};

}  // namespace realdrl
