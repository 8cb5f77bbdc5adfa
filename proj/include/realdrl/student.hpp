#pragma once

#include "realdrl/linalg.hpp"
#include "realdrl/mlp.hpp"
#include "realdrl/replay.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace realdrl {

struct DivergedNetwork : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline SymMatrix cartpole_reward_matrix() {
    return SymMatrix(from_rows({
        {54.1134178606985, 26.2600592637275, 61.7975412804215, 12.9959418258126},
        {26.2600592637275, 14.3613985149923, 34.6710819094179, 7.27321583818861},
        {61.7975412804215, 34.6710819094179, 88.7394386456256, 18.0856894519164},
        {12.9959418258126, 7.27321583818861, 18.0856894519164, 3.83961074325448},
    }));
}

enum class BufferMode {
    Dual,            // separate buffers, safety-informed batch split
    SingleShared,    // one buffer for both sources, uniform sampling
    SingleStudent,   // one buffer, teacher experience discarded
};

struct LearnerConfig {
    double gamma = 0.9;
    double lr_actor = 3e-4;
    double lr_critic = 3e-4;
    int batch = 512;
    double rho1 = 10.0;
    double rho2 = 0.1;
    double gamma1 = 1.0;
    double gamma2 = 0.015;
    SymMatrix reward_P = cartpole_reward_matrix();
    double tau = 0.005;
    double noise_sigma = 5.0;  // 0.1 of the action bound
    double action_bound = 50.0;
    std::vector<int> hidden = {256, 128, 64};
    size_t buffer_capacity = 100000;
    BufferMode buffer_mode = BufferMode::Dual;
    int warmup = 0;  // updates start once this many experiences are stored

    size_t single_capacity() const { return 2 * buffer_capacity; }
};

// (s' Pbar s - s_next' Pbar s_next) * gamma1 - a' a * gamma2
inline double clf_reward(const SymMatrix& Pbar, const Vector& s, const Vector& s_next, const Vector& a,
                         double gamma1, double gamma2) {
    return (Pbar.quad(s) - Pbar.quad(s_next)) * gamma1 - a.squaredNorm() * gamma2;
}

struct UpdateStats {
    double critic_loss = 0.0;
    double actor_objective = 0.0;
    int batch = 0;
    int from_teacher = 0;
};

// DDPG learner with target networks; actions are handled in units of the bound.
template <class S = float>
class Learner {
public:
    using Net = Mlp<S>;
    using Mat = typename Net::Mat;

    Learner(int state_dim, int action_dim, const LearnerConfig& cfg, uint64_t seed)
        : cfg_(cfg), n_(state_dim), m_(action_dim), rng_(seed),
          self_buf_(cfg.buffer_mode == BufferMode::Dual ? cfg.buffer_capacity : cfg.single_capacity()),
          teacher_buf_(cfg.buffer_capacity) {
        std::vector<int> aw{state_dim};
        aw.insert(aw.end(), cfg.hidden.begin(), cfg.hidden.end());
        aw.push_back(action_dim);
        std::vector<int> cw{state_dim + action_dim};
        cw.insert(cw.end(), cfg.hidden.begin(), cfg.hidden.end());
        cw.push_back(1);
        actor = Net(aw, OutputAct::Tanh, rng_);
        critic = Net(cw, OutputAct::Linear, rng_);
        actor_target = actor;
        critic_target = critic;
        actor_opt_ = Adam<S>(actor, cfg.lr_actor);
        critic_opt_ = Adam<S>(critic, cfg.lr_critic);
    }

    const LearnerConfig& config() const { return cfg_; }

    // Deterministic actor output in units of the bound, in (-1, 1).
    Vector policy_unit(const Vector& s) const {
        Mat x = s.cast<S>();
        Mat y = actor.forward(x);
        if (!y.allFinite()) throw DivergedNetwork("actor produced a non-finite action");
        return y.col(0).template cast<double>();
    }

    template <class Rng>
    Vector act(const Vector& s, double noise_scale, Rng& rng) const {
        Vector a = cfg_.action_bound * policy_unit(s);
        if (noise_scale > 0.0) {
            std::normal_distribution<double> nd(0.0, cfg_.noise_sigma * noise_scale);
            for (Eigen::Index i = 0; i < a.size(); ++i) a[i] += nd(rng);
        }
        return a.cwiseMax(-cfg_.action_bound).cwiseMin(cfg_.action_bound);
    }

    Vector act(const Vector& s) const {
        std::mt19937_64 unused(0);
        return act(s, 0.0, unused);
    }

    void store(Experience e) {
        switch (cfg_.buffer_mode) {
            case BufferMode::Dual:
                (e.source == Source::Teacher ? teacher_buf_ : self_buf_).push(std::move(e));
                break;
            case BufferMode::SingleShared:
                self_buf_.push(std::move(e));
                break;
            case BufferMode::SingleStudent:
                if (e.source == Source::Student) self_buf_.push(std::move(e));
                break;
        }
    }

    const ReplayBuffer& self_buffer() const { return self_buf_; }
    const ReplayBuffer& teacher_buffer() const { return teacher_buf_; }
    size_t stored() const { return self_buf_.size() + teacher_buf_.size(); }

    // One update with the batch split driven by the live safety indicator V.
    std::optional<UpdateStats> learn(double V) {
        if (stored() == 0 || static_cast<int>(stored()) < cfg_.warmup) return std::nullopt;
        BatchCounts counts = cfg_.buffer_mode == BufferMode::Dual ? sbs_counts(cfg_.batch, cfg_.rho1, cfg_.rho2, V)
                                                                  : BatchCounts{0, cfg_.batch};
        auto batch = sample_batch(self_buf_, teacher_buf_, counts, rng_);
        return update(batch);
    }

    struct BatchMats {
        Mat s, sn, a, r, live;  // live is 0 for terminal transitions
        int from_teacher = 0;
        int size() const { return static_cast<int>(s.cols()); }
    };

    BatchMats pack(const std::vector<const Experience*>& batch) const {
        const int B = static_cast<int>(batch.size());
        if (B == 0) throw EmptyBuffers();
        BatchMats bm{Mat(n_, B), Mat(n_, B), Mat(m_, B), Mat(1, B), Mat(1, B), 0};
        const S inv_bound = static_cast<S>(1.0 / cfg_.action_bound);
        for (int j = 0; j < B; ++j) {
            const Experience& e = *batch[static_cast<size_t>(j)];
            bm.s.col(j) = e.s.cast<S>();
            bm.sn.col(j) = e.s_next.cast<S>();
            bm.a.col(j) = e.a.cast<S>() * inv_bound;
            bm.r(0, j) = static_cast<S>(e.r);
            bm.live(0, j) = e.terminal ? S(0) : S(1);
            bm.from_teacher += e.source == Source::Teacher;
        }
        return bm;
    }

    // 0.5 * mean (Q(s,a) - r - gamma Q'(s', mu'(s')))^2 and its parameter gradient
    double critic_loss(const BatchMats& bm, typename Net::Grads* g) const {
        const int B = bm.size();
        Mat cin_next(n_ + m_, B);
        cin_next << bm.sn, actor_target.forward(bm.sn);
        const Mat y = bm.r + static_cast<S>(cfg_.gamma) * critic_target.forward(cin_next).cwiseProduct(bm.live);
        Mat cin(n_ + m_, B);
        cin << bm.s, bm.a;
        typename Net::Cache cc;
        const Mat diff = critic.forward(cin, &cc) - y;
        if (g) critic.backward(cc, diff / static_cast<S>(B), g);
        return 0.5 * static_cast<double>(diff.squaredNorm()) / B;
    }

    // mean Q(s, mu(s)); the gradient returned is that of its negation
    double actor_objective(const BatchMats& bm, typename Net::Grads* g) const {
        const int B = bm.size();
        typename Net::Cache ac;
        const Mat mu = actor.forward(bm.s, &ac);
        Mat cin(n_ + m_, B);
        cin << bm.s, mu;
        typename Net::Cache qc;
        const Mat q = critic.forward(cin, &qc);
        if (g) {
            const Mat dcin = critic.backward(qc, Mat::Constant(1, B, static_cast<S>(-1.0 / B)), nullptr);
            actor.backward(ac, dcin.bottomRows(m_), g);
        }
        return static_cast<double>(q.sum()) / B;
    }

    UpdateStats update(const std::vector<const Experience*>& batch) {
        const BatchMats bm = pack(batch);
        typename Net::Grads cg, ag;
        const double closs = critic_loss(bm, &cg);
        critic_opt_.step(critic, cg);
        const double aobj = actor_objective(bm, &ag);
        actor_opt_.step(actor, ag);
        if (!std::isfinite(closs) || !std::isfinite(aobj) || !actor.finite() || !critic.finite())
            throw DivergedNetwork("non-finite loss during update");
        actor_target.soft_update_from(actor, static_cast<S>(cfg_.tau));
        critic_target.soft_update_from(critic, static_cast<S>(cfg_.tau));
        return {closs, aobj, bm.size(), bm.from_teacher};
    }

    Net actor, critic, actor_target, critic_target;

private:
    LearnerConfig cfg_;
    int n_, m_;
    std::mt19937_64 rng_;
    ReplayBuffer self_buf_;
    ReplayBuffer teacher_buf_;
    Adam<S> actor_opt_, critic_opt_;
};

template <class S, class Rng>
Vector actor_action(const Learner<S>& l, const Vector& s, double noise_scale, Rng& rng) {
    return l.act(s, noise_scale, rng);
}

// Flat named-tensor checkpoint: per tensor a line "name rows cols" then row-major values.
template <class S>
void append_tensors(std::map<std::string, Eigen::MatrixXd>& out, const std::string& prefix, const Mlp<S>& net) {
    for (int k = 0; k < net.layers(); ++k) {
        const auto uk = static_cast<size_t>(k);
        out[prefix + ".W" + std::to_string(k)] = net.W[uk].template cast<double>();
        out[prefix + ".b" + std::to_string(k)] = net.b[uk].template cast<double>();
    }
}

template <class S>
void load_tensors(const std::map<std::string, Eigen::MatrixXd>& in, const std::string& prefix, Mlp<S>& net) {
    for (int k = 0; k < net.layers(); ++k) {
        const auto uk = static_cast<size_t>(k);
        const auto& w = in.at(prefix + ".W" + std::to_string(k));
        const auto& b = in.at(prefix + ".b" + std::to_string(k));
        if (w.rows() != net.W[uk].rows() || w.cols() != net.W[uk].cols() || b.size() != net.b[uk].size())
            throw std::runtime_error("checkpoint shape mismatch for " + prefix);
        net.W[uk] = w.cast<S>();
        net.b[uk] = b.col(0).cast<S>();
    }
}

inline void write_tensor_file(const std::string& path, const std::map<std::string, Eigen::MatrixXd>& t) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(9);
    for (const auto& [name, m] : t) {
        out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
            out << '\n';
        }
    }
}

inline std::map<std::string, Eigen::MatrixXd> read_tensor_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::map<std::string, Eigen::MatrixXd> t;
    std::string name;
    Eigen::Index r, c;
    while (in >> name >> r >> c) {
        Eigen::MatrixXd m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) in >> m(i, j);
        if (!in) throw std::runtime_error("truncated tensor " + name);
        t[name] = m;
    }
    return t;
}

template <class S>
void save_checkpoint(const std::string& path, const Learner<S>& l) {
    std::map<std::string, Eigen::MatrixXd> t;
    append_tensors(t, "actor", l.actor);
    append_tensors(t, "critic", l.critic);
    append_tensors(t, "actor_target", l.actor_target);
    append_tensors(t, "critic_target", l.critic_target);
    write_tensor_file(path, t);
}

template <class S>
void load_checkpoint(const std::string& path, Learner<S>& l) {
    const auto t = read_tensor_file(path);
    load_tensors(t, "actor", l.actor);
    load_tensors(t, "critic", l.critic);
    load_tensors(t, "actor_target", l.actor_target);
    load_tensors(t, "critic_target", l.critic_target);
}

}  // namespace realdrl
