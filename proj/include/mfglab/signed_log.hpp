#pragma once

// Signed log-space arithmetic.
//
// Carleman-weighted integrals mix factors like lambda*(T+a)^(lambda-1) whose
// magnitudes overflow double for the lambda values of interest, with weight
// ratios that underflow just as badly.  Every estimate term is therefore
// carried as (sign, log-magnitude) and combined with log-sum-exp; a plain
// double is produced only at the end, in a caller-chosen reference frame.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mfglab {

/// A real number stored as sign * exp(log_magnitude).
/// Zero is sign == 0 (log magnitude -inf).  Never holds NaN.
class SignedLog {
public:
    SignedLog() = default;

    static SignedLog zero() { return SignedLog(); }

    static SignedLog from_value(double v) {
        if (std::isnan(v)) throw std::invalid_argument("SignedLog: NaN input");
        if (v == 0.0) return zero();
        SignedLog s;
        s.sign_ = v > 0.0 ? 1 : -1;
        s.log_ = std::log(std::abs(v));
        return s;
    }

    /// Build from an explicit log magnitude (which may exceed the range where
    /// exp() is representable).  sign in {-1, 0, +1}.
    static SignedLog from_log(int sign, double log_magnitude) {
        if (sign == 0 || log_magnitude == -std::numeric_limits<double>::infinity())
            return zero();
        if (std::isnan(log_magnitude))
            throw std::invalid_argument("SignedLog: NaN log magnitude");
        SignedLog s;
        s.sign_ = sign > 0 ? 1 : -1;
        s.log_ = log_magnitude;
        return s;
    }

    int sign() const { return sign_; }
    double log_magnitude() const { return log_; }
    bool is_zero() const { return sign_ == 0; }

    /// Plain double value; may overflow to +-inf or underflow to 0.
    double value() const { return sign_ == 0 ? 0.0 : sign_ * std::exp(log_); }

    /// Value divided by exp(log_scale); the workhorse for reporting terms in
    /// a common frame where the largest magnitude maps to O(1).
    double value_scaled(double log_scale) const {
        return sign_ == 0 ? 0.0 : sign_ * std::exp(log_ - log_scale);
    }

    SignedLog operator-() const {
        SignedLog s = *this;
        s.sign_ = -s.sign_;
        return s;
    }

    friend SignedLog operator*(const SignedLog& a, const SignedLog& b) {
        if (a.sign_ == 0 || b.sign_ == 0) return zero();
        return from_log(a.sign_ * b.sign_, a.log_ + b.log_);
    }

    friend SignedLog operator*(const SignedLog& a, double c) {
        return a * from_value(c);
    }
    friend SignedLog operator*(double c, const SignedLog& a) {
        return a * from_value(c);
    }

    friend SignedLog operator/(const SignedLog& a, const SignedLog& b) {
        if (b.sign_ == 0) throw std::domain_error("SignedLog: division by zero");
        if (a.sign_ == 0) return zero();
        return from_log(a.sign_ * b.sign_, a.log_ - b.log_);
    }

    friend SignedLog operator+(const SignedLog& a, const SignedLog& b) {
        if (a.sign_ == 0) return b;
        if (b.sign_ == 0) return a;
        // Order so |hi| >= |lo|.
        const SignedLog& hi = (a.log_ >= b.log_) ? a : b;
        const SignedLog& lo = (a.log_ >= b.log_) ? b : a;
        const double d = lo.log_ - hi.log_;  // <= 0
        if (hi.sign_ == lo.sign_)
            return from_log(hi.sign_, hi.log_ + std::log1p(std::exp(d)));
        // Opposite signs: magnitudes subtract; equal magnitudes cancel.
        const double m = std::log1p(-std::exp(d));  // -inf when d == 0
        if (m == -std::numeric_limits<double>::infinity()) return zero();
        return from_log(hi.sign_, hi.log_ + m);
    }

    friend SignedLog operator-(const SignedLog& a, const SignedLog& b) {
        return a + (-b);
    }

    SignedLog& operator+=(const SignedLog& b) { *this = *this + b; return *this; }
    SignedLog& operator-=(const SignedLog& b) { *this = *this - b; return *this; }
    SignedLog& operator*=(const SignedLog& b) { *this = *this * b; return *this; }

    /// Three-way comparison of the represented real values.
    friend int compare(const SignedLog& a, const SignedLog& b) {
        const SignedLog d = a - b;
        return d.sign_;
    }
    friend bool operator<(const SignedLog& a, const SignedLog& b) { return compare(a, b) < 0; }
    friend bool operator>(const SignedLog& a, const SignedLog& b) { return compare(a, b) > 0; }

private:
    int sign_ = 0;
    double log_ = -std::numeric_limits<double>::infinity();
};

}  // namespace mfglab
