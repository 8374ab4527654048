#include "rrisk/sampling.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace rrisk {

double Rng::uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(eng_); }

std::size_t Rng::index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng_); }

double Rng::normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }

std::vector<double> Rng::simplex_point(std::size_t n) {
    std::exponential_distribution<double> ex(1.0);
    std::vector<double> w(n);
    double s = 0.0;
    for (auto& x : w) s += (x = ex(eng_));
    for (auto& x : w) x /= s;
    return w;
}

std::vector<double> Rng::probs(std::size_t n, double floor) {
    std::vector<double> w(n);
    double s = 0.0;
    for (auto& x : w) s += (x = uniform(floor, 1.0));
    double head = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) head += (w[i] /= s);
    w[n - 1] = 1.0 - head;
    return w;
}

Position Rng::position(const SpacePtr& s, double lo, double hi) {
    std::vector<double> v(s->n());
    for (auto& x : v) x = uniform(lo, hi);
    return Position(s, std::move(v));
}

Position Rng::nonneg(const SpacePtr& s, double hi) { return position(s, 0.0, hi); }

Position Rng::direction(const SpacePtr& s) {
    std::vector<double> v(s->n());
    for (auto& x : v) x = normal();
    return Position(s, std::move(v));
}

ScenarioMeasure Rng::measure(const SpacePtr& s) {
    auto q = simplex_point(s->n());
    std::vector<double> d(q.size());
    double mass = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) mass += (d[i] = q[i] / s->prob(i)) * s->prob(i);
    for (auto& x : d) x /= mass;
    return ScenarioMeasure(s, std::move(d));
}

std::vector<std::size_t> Rng::law_preserving_permutation(const ProbSpace& s) {
    std::map<double, std::vector<std::size_t>> classes;
    for (std::size_t i = 0; i < s.n(); ++i) classes[s.prob(i)].push_back(i);
    std::vector<std::size_t> perm(s.n());
    for (auto& [p, members] : classes) {
        auto shuffled = members;
        std::shuffle(shuffled.begin(), shuffled.end(), eng_);
        for (std::size_t k = 0; k < members.size(); ++k) perm[members[k]] = shuffled[k];
    }
    return perm;
}

Position permute(const Position& x, const std::vector<std::size_t>& perm) {
    std::vector<double> v(x.n());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = x[perm[i]];
    return Position(x.space(), std::move(v));
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t counter) {
    // splitmix64 finalizer over the pair
    std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (counter + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace rrisk
