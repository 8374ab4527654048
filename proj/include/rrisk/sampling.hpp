#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "rrisk/prob_core.hpp"

namespace rrisk {

// Seeded source for every randomized routine in the library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform(double a, double b);
    std::size_t index(std::size_t n);  // uniform in [0, n)
    double normal();

    // Dirichlet(1,...,1) draw.
    std::vector<double> simplex_point(std::size_t n);
    // Positive probabilities bounded away from zero, summing to 1 within 1e-15.
    std::vector<double> probs(std::size_t n, double floor = 0.05);

    Position position(const SpacePtr& s, double lo, double hi);
    Position nonneg(const SpacePtr& s, double hi);
    Position direction(const SpacePtr& s);  // Gaussian entries
    ScenarioMeasure measure(const SpacePtr& s);

    // Random permutation restricted to atoms of equal probability, so the
    // permuted position keeps its law.
    std::vector<std::size_t> law_preserving_permutation(const ProbSpace& s);

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

Position permute(const Position& x, const std::vector<std::size_t>& perm);

// Derives an independent child seed; keeps batch runs reproducible.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t counter);

}  // namespace rrisk
