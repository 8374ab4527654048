#include "rrisk/prob_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace rrisk {

namespace {

constexpr double kMassTol = 1e-12;

void require_same(const SpacePtr& a, const SpacePtr& b, const char* where) {
    if (!same_space(a, b)) throw std::invalid_argument(std::string(where) + ": positions live on different spaces");
}

// Sorted atoms of a law with equal values merged.
std::vector<std::pair<double, double>> merged_atoms(const Position& x) {
    const auto& p = x.space()->probs();
    std::vector<std::size_t> idx(x.n());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    std::vector<std::pair<double, double>> out;
    for (auto i : idx) {
        if (!out.empty() && std::fabs(out.back().first - x[i]) <= kMassTol)
            out.back().second += p[i];
        else
            out.emplace_back(x[i], p[i]);
    }
    return out;
}

}  // namespace

ProbSpace::ProbSpace(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw std::invalid_argument("ProbSpace: no atoms");
    double s = 0.0;
    for (double p : probs_) {
        if (!(p > 0.0) || !std::isfinite(p)) throw std::invalid_argument("ProbSpace: probabilities must be positive");
        s += p;
    }
    if (std::fabs(s - 1.0) > kMassTol) throw std::invalid_argument("ProbSpace: probabilities must sum to 1");
}

SpacePtr make_space(std::vector<double> probs) { return std::make_shared<const ProbSpace>(std::move(probs)); }

SpacePtr uniform_space(std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_space: n must be positive");
    return make_space(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

bool same_space(const SpacePtr& a, const SpacePtr& b) { return a == b || (a && b && *a == *b); }

Position::Position(SpacePtr space, std::vector<double> values) : space_(std::move(space)), values_(std::move(values)) {
    if (!space_) throw std::invalid_argument("Position: null space");
    if (values_.size() != space_->n()) throw std::invalid_argument("Position: length does not match the space");
    for (double v : values_)
        if (!std::isfinite(v)) throw std::invalid_argument("Position: values must be finite");
}

Position Position::constant(SpacePtr space, double c) {
    auto n = space->n();
    return Position(std::move(space), std::vector<double>(n, c));
}

Position Position::operator-() const {
    Position r = *this;
    for (auto& v : r.values_) v = -v;
    return r;
}

Position& Position::operator+=(const Position& o) {
    require_same(space_, o.space_, "Position::+");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
}

Position& Position::operator-=(const Position& o) {
    require_same(space_, o.space_, "Position::-");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
}

Position& Position::operator+=(double c) {
    for (auto& v : values_) v += c;
    return *this;
}

Position& Position::operator-=(double c) { return *this += -c; }

Position& Position::operator*=(double c) {
    for (auto& v : values_) v *= c;
    return *this;
}

bool operator==(const Position& a, const Position& b) {
    return same_space(a.space_, b.space_) && a.values_ == b.values_;
}

bool leq(const Position& x, const Position& y) {
    require_same(x.space(), y.space(), "leq");
    for (std::size_t i = 0; i < x.n(); ++i)
        if (x[i] > y[i]) return false;
    return true;
}

bool lex_less(const Position& a, const Position& b) {
    return std::lexicographical_compare(a.values().begin(), a.values().end(), b.values().begin(), b.values().end());
}

Position mix(double lambda, const Position& x, const Position& y) {
    require_same(x.space(), y.space(), "mix");
    std::vector<double> v(x.n());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = lambda * x[i] + (1.0 - lambda) * y[i];
    return Position(x.space(), std::move(v));
}

ScenarioMeasure::ScenarioMeasure(SpacePtr space, std::vector<double> density)
    : space_(std::move(space)), density_(std::move(density)) {
    if (!space_) throw std::invalid_argument("ScenarioMeasure: null space");
    if (density_.size() != space_->n()) throw std::invalid_argument("ScenarioMeasure: length does not match the space");
    double mass = 0.0;
    for (std::size_t i = 0; i < density_.size(); ++i) {
        if (!(density_[i] >= 0.0) || !std::isfinite(density_[i]))
            throw std::invalid_argument("ScenarioMeasure: density must be finite and nonnegative");
        mass += space_->prob(i) * density_[i];
    }
    if (std::fabs(mass - 1.0) > kMassTol) throw std::invalid_argument("ScenarioMeasure: density must integrate to 1");
}

ScenarioMeasure ScenarioMeasure::reference(SpacePtr space) {
    auto n = space->n();
    return ScenarioMeasure(std::move(space), std::vector<double>(n, 1.0));
}

ScenarioMeasure ScenarioMeasure::from_probabilities(SpacePtr space, const std::vector<double>& q) {
    if (q.size() != space->n()) throw std::invalid_argument("ScenarioMeasure: length does not match the space");
    std::vector<double> d(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) d[i] = q[i] / space->prob(i);
    return ScenarioMeasure(std::move(space), std::move(d));
}

std::vector<double> ScenarioMeasure::probabilities() const {
    std::vector<double> q(density_.size());
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = density_[i] * space_->prob(i);
    return q;
}

bool ScenarioMeasure::is_reference(double tol) const {
    return std::all_of(density_.begin(), density_.end(), [&](double d) { return std::fabs(d - 1.0) <= tol; });
}

double expectation(const Position& x) {
    const auto& p = x.space()->probs();
    double s = 0.0;
    for (std::size_t i = 0; i < x.n(); ++i) s += p[i] * x[i];
    return s;
}

double expectation_under(const ScenarioMeasure& q, const Position& x) {
    require_same(q.space(), x.space(), "expectation_under");
    const auto& p = x.space()->probs();
    double s = 0.0;
    for (std::size_t i = 0; i < x.n(); ++i) s += p[i] * q[i] * x[i];
    return s;
}

std::vector<QuantileStep> quantile_function(const Position& x) {
    std::vector<QuantileStep> out;
    double c = 0.0;
    for (auto [v, m] : merged_atoms(x)) {
        c += m;
        out.push_back({c, v});
    }
    out.back().upper = 1.0;
    return out;
}

double wasserstein_distance(const Position& x, const Position& y, double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("wasserstein_distance: p must be >= 1");
    auto qx = quantile_function(x);
    auto qy = quantile_function(y);
    const bool sup = std::isinf(p);
    std::size_t i = 0, j = 0;
    double lo = 0.0, acc = 0.0;
    while (i < qx.size() && j < qy.size()) {
        double hi = std::min(qx[i].upper, qy[j].upper);
        double gap = std::fabs(qx[i].value - qy[j].value);
        double len = hi - lo;
        // breakpoints closer than the mass tolerance are the same breakpoint
        if (len > kMassTol) acc = sup ? std::max(acc, gap) : acc + len * std::pow(gap, p);
        if (qx[i].upper <= hi + kMassTol) ++i;
        if (qy[j].upper <= hi + kMassTol) ++j;
        lo = std::max(lo, hi);
    }
    return sup ? acc : std::pow(acc, 1.0 / p);
}

double relative_entropy(const ScenarioMeasure& q) {
    const auto& p = q.space()->probs();
    double h = 0.0;
    for (std::size_t i = 0; i < q.n(); ++i)
        if (q[i] > 0.0) h += p[i] * q[i] * std::log(q[i]);
    return std::max(h, 0.0);
}

double density_norm(const ScenarioMeasure& q, double qexp) {
    if (!(qexp >= 1.0)) throw std::invalid_argument("density_norm: exponent must be >= 1");
    if (std::isinf(qexp)) return *std::max_element(q.density().begin(), q.density().end());
    const auto& p = q.space()->probs();
    double s = 0.0;
    for (std::size_t i = 0; i < q.n(); ++i) s += p[i] * std::pow(q[i], qexp);
    return std::pow(s, 1.0 / qexp);
}

double lp_norm(const Position& x, double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("lp_norm: exponent must be >= 1");
    if (std::isinf(p)) {
        double m = 0.0;
        for (double v : x.values()) m = std::max(m, std::fabs(v));
        return m;
    }
    const auto& w = x.space()->probs();
    double s = 0.0;
    for (std::size_t i = 0; i < x.n(); ++i) s += w[i] * std::pow(std::fabs(x[i]), p);
    return std::pow(s, 1.0 / p);
}

double conjugate_exponent(double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("conjugate_exponent: p must be >= 1");
    if (p == 1.0) return HUGE_VAL;
    if (std::isinf(p)) return 1.0;
    return p / (p - 1.0);
}

bool same_distribution(const Position& x, const Position& y) {
    auto a = merged_atoms(x), b = merged_atoms(y);
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::fabs(a[i].first - b[i].first) > kMassTol || std::fabs(a[i].second - b[i].second) > kMassTol)
            return false;
    return true;
}

}  // namespace rrisk
