#pragma once

#include <cstddef>
#include <memory>
#include <vector>

namespace rrisk {

// Finite outcome space with strictly positive reference probabilities.
class ProbSpace {
public:
    explicit ProbSpace(std::vector<double> probs);

    std::size_t n() const { return probs_.size(); }
    const std::vector<double>& probs() const { return probs_; }
    double prob(std::size_t i) const { return probs_[i]; }

    friend bool operator==(const ProbSpace& a, const ProbSpace& b) { return a.probs_ == b.probs_; }

private:
    std::vector<double> probs_;
};

using SpacePtr = std::shared_ptr<const ProbSpace>;

SpacePtr make_space(std::vector<double> probs);
SpacePtr uniform_space(std::size_t n);

// True when both pointers denote the same reference measure.
bool same_space(const SpacePtr& a, const SpacePtr& b);

// Payoff vector over the atoms, positive = gain.
class Position {
public:
    Position(SpacePtr space, std::vector<double> values);
    static Position constant(SpacePtr space, double c);

    std::size_t n() const { return values_.size(); }
    const SpacePtr& space() const { return space_; }
    const std::vector<double>& values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }

    Position operator-() const;
    Position& operator+=(const Position& o);
    Position& operator-=(const Position& o);
    Position& operator+=(double c);
    Position& operator-=(double c);
    Position& operator*=(double c);

    friend Position operator+(Position a, const Position& b) { return a += b; }
    friend Position operator-(Position a, const Position& b) { return a -= b; }
    friend Position operator+(Position a, double c) { return a += c; }
    friend Position operator-(Position a, double c) { return a -= c; }
    friend Position operator*(double c, Position a) { return a *= c; }
    friend Position operator*(Position a, double c) { return a *= c; }

    // Exact coordinate-wise equality on the same space.
    friend bool operator==(const Position& a, const Position& b);

private:
    SpacePtr space_;
    std::vector<double> values_;
};

// Pointwise order, X <= Y on every atom.
bool leq(const Position& x, const Position& y);
// Lexicographic order of the coordinate vectors (used for deterministic tie-breaks).
bool lex_less(const Position& a, const Position& b);
// lambda*x + (1-lambda)*y
Position mix(double lambda, const Position& x, const Position& y);

// Probability measure Q << P given by its density dQ/dP.
class ScenarioMeasure {
public:
    ScenarioMeasure(SpacePtr space, std::vector<double> density);
    static ScenarioMeasure reference(SpacePtr space);
    // Q given by atom probabilities q_i; density q_i / p_i.
    static ScenarioMeasure from_probabilities(SpacePtr space, const std::vector<double>& q);

    std::size_t n() const { return density_.size(); }
    const SpacePtr& space() const { return space_; }
    const std::vector<double>& density() const { return density_; }
    double operator[](std::size_t i) const { return density_[i]; }
    std::vector<double> probabilities() const;

    bool is_reference(double tol = 1e-12) const;

private:
    SpacePtr space_;
    std::vector<double> density_;
};

double expectation(const Position& x);
double expectation_under(const ScenarioMeasure& q, const Position& x);

struct QuantileStep {
    double upper;  // right end of the interval in (0,1]
    double value;
};
// Right-continuous inverse CDF as (cumulative probability, value) steps,
// equal values merged.
std::vector<QuantileStep> quantile_function(const Position& x);

// p in [1, inf]; pass std::numeric_limits<double>::infinity() for the sup gap.
double wasserstein_distance(const Position& x, const Position& y, double p);

// H(Q|P) = sum p_i d_i ln d_i, with 0 ln 0 = 0. Always finite here.
double relative_entropy(const ScenarioMeasure& q);

// L^q(P) norm of the density, q in [1, inf].
double density_norm(const ScenarioMeasure& q, double qexp);

// L^p(P) norm of a position, p in [1, inf].
double lp_norm(const Position& x, double p);

// Hoelder conjugate exponent: 1 -> inf, inf -> 1.
double conjugate_exponent(double p);

bool same_distribution(const Position& x, const Position& y);

}  // namespace rrisk
