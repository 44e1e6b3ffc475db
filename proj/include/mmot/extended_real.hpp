#pragma once

#include <cmath>
#include <compare>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace mmot {

// A nonnegative-or-finite real extended by a typed +infinity.
// Arithmetic with +inf is absorbing and ordering is total (+inf is the largest element).
class ExtendedReal {
public:
    constexpr ExtendedReal() = default;
    constexpr ExtendedReal(double v) : value_(v) {
        if (std::isnan(v) || std::isinf(v)) {
            throw std::domain_error("ExtendedReal: raw non-finite value; use ExtendedReal::infinity()");
        }
    }

    static constexpr ExtendedReal infinity() {
        ExtendedReal r;
        r.infinite_ = true;
        return r;
    }

    constexpr bool is_infinite() const { return infinite_; }
    constexpr bool is_finite() const { return !infinite_; }

    // Throws on +inf; callers check is_finite() first.
    double value() const {
        if (infinite_) {
            throw std::domain_error("ExtendedReal: value() on +inf");
        }
        return value_;
    }

    double value_or(double fallback) const { return infinite_ ? fallback : value_; }

    friend constexpr ExtendedReal operator+(ExtendedReal a, ExtendedReal b) {
        if (a.infinite_ || b.infinite_) {
            return infinity();
        }
        ExtendedReal r;
        r.value_ = a.value_ + b.value_;
        return r;
    }
    ExtendedReal& operator+=(ExtendedReal o) { return *this = *this + o; }

    // Scaling by a nonnegative factor; 0 * inf is taken as 0 (measure-theoretic convention).
    friend ExtendedReal operator*(double s, ExtendedReal a) {
        if (s < 0.0) {
            throw std::domain_error("ExtendedReal: negative scale");
        }
        if (a.infinite_) {
            return s == 0.0 ? ExtendedReal(0.0) : infinity();
        }
        return ExtendedReal(s * a.value_);
    }

    friend constexpr bool operator==(ExtendedReal a, ExtendedReal b) {
        if (a.infinite_ || b.infinite_) {
            return a.infinite_ == b.infinite_;
        }
        return a.value_ == b.value_;
    }
    friend constexpr std::strong_ordering operator<=>(ExtendedReal a, ExtendedReal b) {
        if (a.infinite_ || b.infinite_) {
            return static_cast<int>(a.infinite_) <=> static_cast<int>(b.infinite_);
        }
        if (a.value_ < b.value_) return std::strong_ordering::less;
        if (a.value_ > b.value_) return std::strong_ordering::greater;
        return std::strong_ordering::equal;
    }

    friend std::ostream& operator<<(std::ostream& os, ExtendedReal v) {
        if (v.infinite_) return os << "inf";
        return os << v.value_;
    }

private:
    double value_ = 0.0;
    bool infinite_ = false;
};

inline ExtendedReal min(ExtendedReal a, ExtendedReal b) { return b < a ? b : a; }

}  // namespace mmot
