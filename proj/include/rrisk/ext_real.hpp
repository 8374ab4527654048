#pragma once

#include <compare>
#include <string>

namespace rrisk {

// Value in the extended real line. Ordering is total; (+inf) + (-inf) throws.
class ExtReal {
public:
    enum class Kind { Finite, PosInf, NegInf };

    ExtReal() = default;
    // Implicit on purpose: finite results flow into ExtReal without ceremony.
    // Floating infinities map to the matching tag, NaN is rejected.
    ExtReal(double v);  // NOLINT(google-explicit-constructor)

    static ExtReal pos_inf();
    static ExtReal neg_inf();

    Kind kind() const { return kind_; }
    bool is_finite() const { return kind_ == Kind::Finite; }
    bool is_pos_inf() const { return kind_ == Kind::PosInf; }
    bool is_neg_inf() const { return kind_ == Kind::NegInf; }

    // Throws std::domain_error when infinite.
    double value() const;
    // Maps infinities to +-HUGE_VAL; handy for comparisons with tolerances.
    double to_double() const;

    ExtReal operator-() const;
    ExtReal& operator+=(const ExtReal& o);
    ExtReal& operator-=(const ExtReal& o);

    friend ExtReal operator+(ExtReal a, const ExtReal& b) { return a += b; }
    friend ExtReal operator-(ExtReal a, const ExtReal& b) { return a -= b; }

    friend bool operator==(const ExtReal& a, const ExtReal& b);
    friend std::partial_ordering operator<=>(const ExtReal& a, const ExtReal& b);

private:
    Kind kind_ = Kind::Finite;
    double v_ = 0.0;
};

ExtReal max(const ExtReal& a, const ExtReal& b);
ExtReal min(const ExtReal& a, const ExtReal& b);

// "inf", "-inf" or a 17-significant-digit decimal.
std::string to_string(const ExtReal& x);

}  // namespace rrisk
