#include "rrisk/verdict.hpp"

namespace rrisk {

PropertyVerdict PropertyVerdict::certified(std::string why) {
    PropertyVerdict v;
    v.tag = Tag::CertifiedHolds;
    v.note = std::move(why);
    return v;
}

PropertyVerdict PropertyVerdict::sampled(std::size_t trials, std::string note) {
    PropertyVerdict v;
    v.tag = Tag::SampledNoCounterexample;
    v.trials = trials;
    v.note = std::move(note);
    return v;
}

PropertyVerdict PropertyVerdict::counterexample(Witness w, std::string note) {
    PropertyVerdict v;
    v.tag = Tag::Counterexample;
    v.witness = std::move(w);
    v.note = std::move(note);
    return v;
}

PropertyVerdict PropertyVerdict::unknown(std::string why) {
    PropertyVerdict v;
    v.tag = Tag::Unknown;
    v.note = std::move(why);
    return v;
}

std::string to_string(PropertyVerdict::Tag t) {
    switch (t) {
        case PropertyVerdict::Tag::CertifiedHolds: return "CertifiedHolds";
        case PropertyVerdict::Tag::SampledNoCounterexample: return "SampledNoCounterexample";
        case PropertyVerdict::Tag::Counterexample: return "Counterexample";
        default: return "Unknown";
    }
}

}  // namespace rrisk
