#pragma once

// Seeded generators and brute-force oracles shared by the unit tests.
// Oracles here deliberately avoid the library's own algorithms.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "rrisk/prob_core.hpp"

namespace testsupport {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : eng_(seed) {}

    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(eng_); }
    int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(eng_); }

    std::vector<double> probs(std::size_t n) {
        std::vector<double> w(n);
        double s = 0.0;
        for (auto& x : w) {
            x = uniform(0.05, 1.0);
            s += x;
        }
        for (auto& x : w) x /= s;
        // push the rounding residue onto the last atom
        double head = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) head += w[i];
        w[n - 1] = 1.0 - head;
        return w;
    }

    rrisk::SpacePtr space(std::size_t n) { return rrisk::make_space(probs(n)); }

    rrisk::Position position(const rrisk::SpacePtr& s, double lo = -3.0, double hi = 3.0) {
        std::vector<double> v(s->n());
        for (auto& x : v) x = uniform(lo, hi);
        return rrisk::Position(s, v);
    }

    rrisk::Position nonneg(const rrisk::SpacePtr& s, double hi = 2.0) { return position(s, 0.0, hi); }

    rrisk::ScenarioMeasure measure(const rrisk::SpacePtr& s) {
        return rrisk::ScenarioMeasure::from_probabilities(s, probs(s->n()));
    }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

// W_p between two positions on the same uniform n-atom space: minimum over
// all permutation couplings (optimal plans are permutations by Birkhoff).
inline double wasserstein_by_permutations(const std::vector<double>& x, std::vector<double> y, double p) {
    std::sort(y.begin(), y.end());
    const double n = static_cast<double>(x.size());
    double best = INFINITY;
    do {
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double g = std::fabs(x[i] - y[i]);
            acc = std::isinf(p) ? std::max(acc, g) : acc + std::pow(g, p) / n;
        }
        best = std::min(best, std::isinf(p) ? acc : std::pow(acc, 1.0 / p));
    } while (std::next_permutation(y.begin(), y.end()));
    return best;
}

// Quantile at level u by CDF inversion: smallest value whose CDF reaches u.
inline double quantile_at(const std::vector<double>& v, const std::vector<double>& p, double u) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    double c = 0.0;
    for (auto i : idx) {
        c += p[i];
        if (c >= u - 1e-15) return v[i];
    }
    return v[idx.back()];
}

// Midpoint-rule estimate of the quantile-gap integral. Coarse but independent.
inline double wasserstein_by_midpoints(const rrisk::Position& x, const rrisk::Position& y, double p, int m) {
    double acc = 0.0;
    for (int k = 0; k < m; ++k) {
        double u = (k + 0.5) / m;
        double g = std::fabs(quantile_at(x.values(), x.space()->probs(), u) -
                             quantile_at(y.values(), y.space()->probs(), u));
        acc += std::pow(g, p) / m;
    }
    return std::pow(acc, 1.0 / p);
}

}  // namespace testsupport
