#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace traitlab {

// Fenwick (binary indexed) tree over nonnegative double weights with
// logarithmic update and inverse-CDF sampling. Used by the event engine to
// pick the next event site proportionally to its composite rate.
class FenwickTree {
public:
    explicit FenwickTree(std::size_t n) : n_(n), tree_(n + 1, 0.0), leaf_(n, 0.0) {}

    std::size_t size() const { return n_; }

    double value(std::size_t i) const { return leaf_[i]; }

    double total() const { return prefix_sum(n_); }

    void set(std::size_t i, double v) {
        double delta = v - leaf_[i];
        leaf_[i] = v;
        for (std::size_t k = i + 1; k <= n_; k += k & (~k + 1)) tree_[k] += delta;
    }

    // Largest index i with prefix_sum(i) <= x, i.e. the leaf whose cumulative
    // bucket contains x. Requires 0 <= x < total().
    std::size_t sample(double x) const {
        std::size_t idx = 0;
        std::size_t mask = high_bit_;
        while (mask != 0) {
            std::size_t next = idx + mask;
            if (next <= n_ && tree_[next] <= x) {
                x -= tree_[next];
                idx = next;
            }
            mask >>= 1;
        }
        return idx < n_ ? idx : n_ - 1;
    }

    // Recomputes all internal sums from the leaves. Incremental updates
    // accumulate floating-point drift over millions of events; callers rebuild
    // periodically to keep sampling weights honest.
    void rebuild() {
        std::fill(tree_.begin(), tree_.end(), 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            double v = leaf_[i];
            for (std::size_t k = i + 1; k <= n_; k += k & (~k + 1)) tree_[k] += v;
        }
    }

    void init_high_bit() {
        high_bit_ = 1;
        while ((high_bit_ << 1) <= n_) high_bit_ <<= 1;
    }

private:
    double prefix_sum(std::size_t i) const {
        double s = 0.0;
        for (std::size_t k = i; k > 0; k -= k & (~k + 1)) s += tree_[k];
        return s;
    }

    std::size_t n_;
    std::size_t high_bit_ = 1;
    std::vector<double> tree_;
    std::vector<double> leaf_;
};

inline FenwickTree make_fenwick(std::size_t n) {
    FenwickTree t(n);
    t.init_high_bit();
    return t;
}

}  // namespace traitlab
