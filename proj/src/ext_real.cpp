#include "rrisk/ext_real.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace rrisk {

ExtReal::ExtReal(double v) {
    if (std::isnan(v)) throw std::domain_error("ExtReal: NaN");
    if (std::isinf(v)) {
        kind_ = v > 0 ? Kind::PosInf : Kind::NegInf;
        v_ = 0.0;
    } else {
        v_ = v;
    }
}

ExtReal ExtReal::pos_inf() {
    ExtReal r;
    r.kind_ = Kind::PosInf;
    return r;
}

ExtReal ExtReal::neg_inf() {
    ExtReal r;
    r.kind_ = Kind::NegInf;
    return r;
}

double ExtReal::value() const {
    if (kind_ != Kind::Finite) throw std::domain_error("ExtReal: infinite value has no finite representation");
    return v_;
}

double ExtReal::to_double() const {
    switch (kind_) {
        case Kind::PosInf: return HUGE_VAL;
        case Kind::NegInf: return -HUGE_VAL;
        default: return v_;
    }
}

ExtReal ExtReal::operator-() const {
    switch (kind_) {
        case Kind::PosInf: return neg_inf();
        case Kind::NegInf: return pos_inf();
        default: return ExtReal(-v_);
    }
}

ExtReal& ExtReal::operator+=(const ExtReal& o) {
    if (kind_ == Kind::Finite && o.kind_ == Kind::Finite) {
        v_ += o.v_;
        // overflow of two finite values is a genuine infinity
        if (std::isinf(v_)) *this = ExtReal(v_);
        return *this;
    }
    if (kind_ != Kind::Finite && o.kind_ != Kind::Finite && kind_ != o.kind_)
        throw std::domain_error("ExtReal: (+inf) + (-inf) is undefined");
    if (kind_ == Kind::Finite) *this = o;
    return *this;
}

ExtReal& ExtReal::operator-=(const ExtReal& o) { return *this += -o; }

bool operator==(const ExtReal& a, const ExtReal& b) {
    if (a.kind_ != b.kind_) return false;
    return a.kind_ != ExtReal::Kind::Finite || a.v_ == b.v_;
}

std::partial_ordering operator<=>(const ExtReal& a, const ExtReal& b) {
    auto rank = [](const ExtReal& x) {
        return x.kind_ == ExtReal::Kind::NegInf ? 0 : x.kind_ == ExtReal::Kind::Finite ? 1 : 2;
    };
    int ra = rank(a), rb = rank(b);
    if (ra != rb) return ra <=> rb;
    if (ra != 1) return std::partial_ordering::equivalent;
    return a.v_ <=> b.v_;
}

ExtReal max(const ExtReal& a, const ExtReal& b) { return a < b ? b : a; }
ExtReal min(const ExtReal& a, const ExtReal& b) { return b < a ? b : a; }

std::string to_string(const ExtReal& x) {
    if (x.is_pos_inf()) return "inf";
    if (x.is_neg_inf()) return "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x.value());
    return buf;
}

}  // namespace rrisk
