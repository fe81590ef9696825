#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "traitlab/population.hpp"
#include "traitlab/rng.hpp"

namespace traitlab {

// Deterministic parallel map-reduce over replicates. Replicates are grouped
// into fixed-size blocks; each block is reduced sequentially by one worker
// and block partials are merged in block order afterwards, so the result is
// bitwise independent of the worker count and scheduling.
//
// Body signature: void(std::uint64_t replicate_index, std::uint64_t seed, R&).
template <class R, class Body>
R run_blocks(std::uint64_t replicates, std::uint64_t base_seed, unsigned workers,
             std::uint64_t block_size, Body&& body, R proto) {
    if (replicates == 0) return proto;
    if (block_size == 0) block_size = 64;
    if (workers == 0) workers = 1;
    const std::uint64_t n_blocks = (replicates + block_size - 1) / block_size;
    std::vector<R> partials(static_cast<std::size_t>(n_blocks), proto);
    std::atomic<std::uint64_t> next{0};

    auto work = [&]() {
        for (;;) {
            std::uint64_t blk = next.fetch_add(1);
            if (blk >= n_blocks) return;
            R local = proto;
            std::uint64_t lo = blk * block_size;
            std::uint64_t hi = std::min(replicates, lo + block_size);
            for (std::uint64_t r = lo; r < hi; ++r) {
                body(r, derive_stream(base_seed, r), local);
            }
            partials[static_cast<std::size_t>(blk)] = std::move(local);
        }
    };

    if (workers <= 1 || n_blocks <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        unsigned n = static_cast<unsigned>(std::min<std::uint64_t>(workers, n_blocks));
        pool.reserve(n);
        for (unsigned i = 0; i < n; ++i) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    R out = std::move(partials[0]);
    for (std::size_t b = 1; b < partials.size(); ++b) out.merge(partials[b]);
    return out;
}

// Streamed per-(time, site) moments of an ensemble of trajectories. Central
// moments up to order four give the mean and the variance together with their
// standard errors; the optional cross block keeps E[N_i N_j] for small
// windows.
class MomentAccumulator {
public:
    MomentAccumulator() = default;
    MomentAccumulator(std::size_t n_times, std::size_t width, bool with_fourth,
                      bool with_cross)
        : n_times_(n_times), width_(width), fourth_(with_fourth), cross_(with_cross) {
        s1_.assign(n_times * width, 0.0);
        s2_.assign(n_times * width, 0.0);
        if (fourth_) {
            s3_.assign(n_times * width, 0.0);
            s4_.assign(n_times * width, 0.0);
        }
        if (cross_) cross2_.assign(n_times * width * width, 0.0);
    }

    void add(const Trajectory& traj) {
        ++reps_;
        leak_ += traj.boundary_leak;
        for (std::size_t k = 0; k < n_times_ && k < traj.counts.size(); ++k) {
            const auto& row = traj.counts[k];
            for (std::size_t i = 0; i < width_; ++i) {
                double v = static_cast<double>(row[i]);
                std::size_t idx = k * width_ + i;
                s1_[idx] += v;
                s2_[idx] += v * v;
                if (fourth_) {
                    s3_[idx] += v * v * v;
                    s4_[idx] += v * v * v * v;
                }
            }
            if (cross_) {
                for (std::size_t i = 0; i < width_; ++i) {
                    double vi = static_cast<double>(row[i]);
                    for (std::size_t j = 0; j < width_; ++j) {
                        cross2_[(k * width_ + i) * width_ + j] +=
                            vi * static_cast<double>(row[j]);
                    }
                }
            }
        }
    }

    void merge(const MomentAccumulator& o) {
        reps_ += o.reps_;
        leak_ += o.leak_;
        for (std::size_t i = 0; i < s1_.size(); ++i) s1_[i] += o.s1_[i];
        for (std::size_t i = 0; i < s2_.size(); ++i) s2_[i] += o.s2_[i];
        for (std::size_t i = 0; i < s3_.size(); ++i) s3_[i] += o.s3_[i];
        for (std::size_t i = 0; i < s4_.size(); ++i) s4_[i] += o.s4_[i];
        for (std::size_t i = 0; i < cross2_.size(); ++i) cross2_[i] += o.cross2_[i];
    }

    std::uint64_t replicates() const { return reps_; }
    std::uint64_t total_boundary_leak() const { return leak_; }

    double mean(std::size_t t, std::size_t i) const {
        return s1_[t * width_ + i] / static_cast<double>(reps_);
    }

    // Standard error of the sample mean.
    double mean_se(std::size_t t, std::size_t i) const {
        double r = static_cast<double>(reps_);
        double m = mean(t, i);
        double var = (s2_[t * width_ + i] - r * m * m) / (r - 1.0);
        return std::sqrt(std::max(var, 0.0) / r);
    }

    // Unbiased sample variance of the site count.
    double variance(std::size_t t, std::size_t i) const {
        double r = static_cast<double>(reps_);
        double m = mean(t, i);
        return (s2_[t * width_ + i] - r * m * m) / (r - 1.0);
    }

    // Standard error of the sample variance via the central fourth moment:
    // Var(s^2) ~ (m4 - (r-3)/(r-1) s^4) / r.
    double variance_se(std::size_t t, std::size_t i) const {
        double r = static_cast<double>(reps_);
        std::size_t idx = t * width_ + i;
        double m = mean(t, i);
        double m2 = s2_[idx] / r - m * m;
        double m3 = s3_[idx] / r - 3.0 * m * s2_[idx] / r + 2.0 * m * m * m;
        double m4c = s4_[idx] / r - 4.0 * m * s3_[idx] / r + 6.0 * m * m * s2_[idx] / r -
                     3.0 * m * m * m * m;
        (void)m3;
        double s2v = variance(t, i);
        double var_of_var = (m4c - (r - 3.0) / (r - 1.0) * s2v * s2v) / r;
        return std::sqrt(std::max(var_of_var, 0.0));
    }

    // Raw second cross moment estimate E[N_i N_j].
    double cross_second(std::size_t t, std::size_t i, std::size_t j) const {
        return cross2_[(t * width_ + i) * width_ + j] / static_cast<double>(reps_);
    }

    std::size_t n_times() const { return n_times_; }
    std::size_t width() const { return width_; }

private:
    std::size_t n_times_ = 0, width_ = 0;
    bool fourth_ = false, cross_ = false;
    std::uint64_t reps_ = 0, leak_ = 0;
    std::vector<double> s1_, s2_, s3_, s4_, cross2_;
};

}  // namespace traitlab
