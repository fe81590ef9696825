#pragma once

// Brute-force distributional oracle for tiny models: enumerate every state of
// the capped lattice, build the truncated generator with the same event
// semantics as the simulator (absorbing boundary, censored cap), and push the
// initial law through e^{Qt} by uniformization. Independent of the event
// engine: no shared sampling machinery.

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "traitlab/model.hpp"

namespace traitlab::testsupport {

class CtmcOracle {
public:
    CtmcOracle(const Model& model, std::int64_t cap) : model_(model), cap_(cap) {
        std::vector<std::int64_t> state(model.width(), 0);
        enumerate(state, 0);
    }

    std::size_t state_count() const { return states_.size(); }

    std::size_t index_of(const std::vector<std::int64_t>& s) const {
        auto it = lookup_.find(s);
        return it == lookup_.end() ? npos : it->second;
    }
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    // Law at time t started from a deterministic state.
    std::vector<double> law_at(const std::vector<std::int64_t>& start, double t) const {
        std::vector<double> pi(states_.size(), 0.0);
        std::size_t s0 = index_of(start);
        pi.at(s0) = 1.0;

        // assemble sparse transitions once
        struct Edge {
            std::size_t from, to;
            double rate;
        };
        std::vector<Edge> edges;
        std::vector<double> outflow(states_.size(), 0.0);
        const std::size_t w = model_.width();
        const std::int64_t L = model_.kernel.l_max;
        for (std::size_t s = 0; s < states_.size(); ++s) {
            const auto& st = states_[s];
            std::int64_t total = 0;
            for (auto c : st) total += c;
            for (std::size_t i = 0; i < w; ++i) {
                if (st[i] == 0) continue;
                double ni = static_cast<double>(st[i]);
                // death
                {
                    auto next = st;
                    --next[i];
                    double rate = model_.d_at(i) * ni;
                    if (rate > 0.0) {
                        edges.push_back({s, index_of(next), rate});
                        outflow[s] += rate;
                    }
                }
                // birth (censored at the cap)
                if (total < cap_) {
                    auto next = st;
                    ++next[i];
                    double rate = model_.b_at(i) * ni;
                    if (rate > 0.0) {
                        edges.push_back({s, index_of(next), rate});
                        outflow[s] += rate;
                    }
                }
                // mutation offspring at i + l; outside the window it leaks
                // (no state change), at the cap it is censored
                for (std::int64_t l = -L; l <= L; ++l) {
                    double rate = model_.kernel.w(l) * ni;
                    if (rate <= 0.0) continue;
                    std::int64_t tgt = static_cast<std::int64_t>(i) + l;
                    if (tgt < 0 || tgt >= static_cast<std::int64_t>(w)) continue;
                    if (total >= cap_) continue;
                    auto next = st;
                    ++next[static_cast<std::size_t>(tgt)];
                    edges.push_back({s, index_of(next), rate});
                    outflow[s] += rate;
                }
            }
        }
        double lambda = 0.0;
        for (double f : outflow) lambda = std::max(lambda, f);
        if (lambda <= 0.0) return pi;

        // uniformization: pi(t) = sum_k Pois(lambda t, k) pi P^k
        std::vector<double> cur = pi, nxt(states_.size(), 0.0);
        std::vector<double> result(states_.size(), 0.0);
        double lt = lambda * t;
        double logw = -lt;  // log Poisson weight at k = 0
        double tail = 1.0;
        for (int k = 0;; ++k) {
            double wgt = std::exp(logw);
            for (std::size_t s = 0; s < states_.size(); ++s) result[s] += wgt * cur[s];
            tail -= wgt;
            if (tail < 1e-14 && k > lt) break;
            if (k > 100000) break;
            // cur <- cur P with P = I + Q / lambda
            std::fill(nxt.begin(), nxt.end(), 0.0);
            for (std::size_t s = 0; s < states_.size(); ++s) {
                if (cur[s] == 0.0) continue;
                nxt[s] += cur[s] * (1.0 - outflow[s] / lambda);
            }
            for (const auto& e : edges) {
                if (cur[e.from] == 0.0) continue;
                nxt[e.to] += cur[e.from] * (e.rate / lambda);
            }
            cur.swap(nxt);
            logw += std::log(lt) - std::log(static_cast<double>(k + 1));
        }
        return result;
    }

    const std::vector<std::vector<std::int64_t>>& states() const { return states_; }

private:
    void enumerate(std::vector<std::int64_t>& state, std::size_t site) {
        if (site == state.size()) {
            lookup_[state] = states_.size();
            states_.push_back(state);
            return;
        }
        std::int64_t used = 0;
        for (std::size_t i = 0; i < site; ++i) used += state[i];
        for (std::int64_t c = 0; c <= cap_ - used; ++c) {
            state[site] = c;
            enumerate(state, site + 1);
        }
        state[site] = 0;
    }

    const Model& model_;
    std::int64_t cap_;
    std::vector<std::vector<std::int64_t>> states_;
    std::map<std::vector<std::int64_t>, std::size_t> lookup_;
};

}  // namespace traitlab::testsupport
