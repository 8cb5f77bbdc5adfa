#pragma once

#include "realdrl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace realdrl {

enum class Source { Student, Teacher };

inline const char* to_string(Source s) { return s == Source::Student ? "student" : "teacher"; }

struct Experience {
    Vector s;
    Vector a;
    Vector s_next;
    double r = 0.0;
    Source source = Source::Student;
    bool terminal = false;  // no bootstrap past s_next
};

struct EmptyBuffers : std::runtime_error {
    EmptyBuffers() : std::runtime_error("both replay buffers are empty") {}
};

// Fixed-capacity FIFO ring.
class ReplayBuffer {
public:
    explicit ReplayBuffer(size_t capacity = 100000) : capacity_(capacity) {
        if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
        items_.reserve(std::min<size_t>(capacity, 4096));
    }

    void push(Experience e) {
        if (items_.size() < capacity_) {
            items_.push_back(std::move(e));
        } else {
            items_[head_] = std::move(e);
            head_ = (head_ + 1) % capacity_;
        }
        ++pushed_;
    }

    size_t size() const { return items_.size(); }
    size_t capacity() const { return capacity_; }
    bool empty() const { return items_.empty(); }
    size_t total_pushed() const { return pushed_; }

    // i-th oldest stored item
    const Experience& at(size_t i) const { return items_[(head_ + i) % items_.size()]; }

    // k distinct indices, uniform, via Floyd's algorithm
    template <class Rng>
    std::vector<size_t> sample_indices(size_t k, Rng& rng) const {
        const size_t n = items_.size();
        k = std::min(k, n);
        std::vector<size_t> out;
        out.reserve(k);
        for (size_t j = n - k; j < n; ++j) {
            std::uniform_int_distribution<size_t> u(0, j);
            const size_t t = u(rng);
            if (std::find(out.begin(), out.end(), t) == out.end())
                out.push_back(t);
            else
                out.push_back(j);
        }
        return out;
    }

    const Experience& raw(size_t i) const { return items_[i]; }

private:
    size_t capacity_;
    size_t head_ = 0;
    size_t pushed_ = 0;
    std::vector<Experience> items_;
};

struct BatchCounts {
    int n_teacher = 0;
    int n_self = 0;
};

// Batch split between the teaching-to-learn and self-learning buffers.
inline BatchCounts sbs_counts(int L, double rho1, double rho2, double V) {
    if (L < 1) throw std::invalid_argument("sbs_counts: L must be >= 1");
    const double raw = static_cast<double>(L) * (rho1 * V + rho2);
    const double snapped = std::ceil(raw - 1e-9 * std::max(1.0, std::abs(raw)));
    const int nt = static_cast<int>(std::clamp(snapped, 0.0, static_cast<double>(L)));
    return {nt, L - nt};
}

template <class Rng>
std::vector<const Experience*> sample_batch(const ReplayBuffer& self_buf, const ReplayBuffer& teacher_buf,
                                            BatchCounts counts, Rng& rng) {
    if (self_buf.empty() && teacher_buf.empty()) throw EmptyBuffers();
    size_t want_t = static_cast<size_t>(std::max(0, counts.n_teacher));
    size_t want_s = static_cast<size_t>(std::max(0, counts.n_self));
    // quota a buffer cannot meet moves to the other one
    if (want_t > teacher_buf.size()) {
        want_s += want_t - teacher_buf.size();
        want_t = teacher_buf.size();
    }
    if (want_s > self_buf.size()) {
        const size_t extra = want_s - self_buf.size();
        want_s = self_buf.size();
        want_t = std::min(teacher_buf.size(), want_t + extra);
    }
    std::vector<const Experience*> batch;
    batch.reserve(want_t + want_s);
    for (size_t i : teacher_buf.sample_indices(want_t, rng)) batch.push_back(&teacher_buf.raw(i));
    for (size_t i : self_buf.sample_indices(want_s, rng)) batch.push_back(&self_buf.raw(i));
    return batch;
}

}  // namespace realdrl
