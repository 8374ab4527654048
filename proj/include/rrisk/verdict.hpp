#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace rrisk {

// Data needed to replay a violation: named vectors over one probability space
// plus named scalars.
struct Witness {
    std::vector<double> probs;
    std::map<std::string, std::vector<double>> vectors;
    std::map<std::string, double> scalars;
};

struct PropertyVerdict {
    enum class Tag { CertifiedHolds, SampledNoCounterexample, Counterexample, Unknown };

    Tag tag = Tag::Unknown;
    std::size_t trials = 0;
    Witness witness;   // meaningful for Counterexample
    std::string note;  // certificate used, or why the check was inconclusive

    static PropertyVerdict certified(std::string why);
    static PropertyVerdict sampled(std::size_t trials, std::string note = {});
    static PropertyVerdict counterexample(Witness w, std::string note = {});
    static PropertyVerdict unknown(std::string why);

    bool is_counterexample() const { return tag == Tag::Counterexample; }
    // CertifiedHolds or SampledNoCounterexample.
    bool holds() const { return tag == Tag::CertifiedHolds || tag == Tag::SampledNoCounterexample; }
};

std::string to_string(PropertyVerdict::Tag t);

// Raised when an operation's hypotheses are not met by the declared flags or
// by the family's property verdicts.
class HypothesisError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace rrisk
