#pragma once

// Minimal RAII wrapper around MPFR, used where plain doubles lose the signal
// to cancellation (e.g. r(z) - e^{-z} for z -> 0 with high-order schemes).

#include <mpfr.h>

#include <complex>
#include <string>
#include <utility>

namespace dsmr::detail {

class Real {
  public:
    static constexpr mpfr_prec_t default_prec = 256;

    Real() { mpfr_init2(v_, default_prec); mpfr_set_zero(v_, 1); }
    explicit Real(double x) { mpfr_init2(v_, default_prec); mpfr_set_d(v_, x, MPFR_RNDN); }
    explicit Real(long x) { mpfr_init2(v_, default_prec); mpfr_set_si(v_, x, MPFR_RNDN); }
    Real(const Real& o) { mpfr_init2(v_, default_prec); mpfr_set(v_, o.v_, MPFR_RNDN); }
    Real(Real&& o) noexcept { mpfr_init2(v_, default_prec); mpfr_swap(v_, o.v_); }
    Real& operator=(const Real& o) {
        if (this != &o) mpfr_set(v_, o.v_, MPFR_RNDN);
        return *this;
    }
    Real& operator=(Real&& o) noexcept {
        mpfr_swap(v_, o.v_);
        return *this;
    }
    ~Real() { mpfr_clear(v_); }

    double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }

    friend Real operator+(const Real& a, const Real& b) { Real r; mpfr_add(r.v_, a.v_, b.v_, MPFR_RNDN); return r; }
    friend Real operator-(const Real& a, const Real& b) { Real r; mpfr_sub(r.v_, a.v_, b.v_, MPFR_RNDN); return r; }
    friend Real operator*(const Real& a, const Real& b) { Real r; mpfr_mul(r.v_, a.v_, b.v_, MPFR_RNDN); return r; }
    friend Real operator/(const Real& a, const Real& b) { Real r; mpfr_div(r.v_, a.v_, b.v_, MPFR_RNDN); return r; }
    Real operator-() const { Real r; mpfr_neg(r.v_, v_, MPFR_RNDN); return r; }
    Real& operator+=(const Real& o) { mpfr_add(v_, v_, o.v_, MPFR_RNDN); return *this; }
    Real& operator-=(const Real& o) { mpfr_sub(v_, v_, o.v_, MPFR_RNDN); return *this; }
    Real& operator*=(const Real& o) { mpfr_mul(v_, v_, o.v_, MPFR_RNDN); return *this; }

    friend Real abs(const Real& a) { Real r; mpfr_abs(r.v_, a.v_, MPFR_RNDN); return r; }
    friend Real exp(const Real& a) { Real r; mpfr_exp(r.v_, a.v_, MPFR_RNDN); return r; }
    friend Real log(const Real& a) { Real r; mpfr_log(r.v_, a.v_, MPFR_RNDN); return r; }
    friend Real log10(const Real& a) { Real r; mpfr_log10(r.v_, a.v_, MPFR_RNDN); return r; }
    friend Real sqrt(const Real& a) { Real r; mpfr_sqrt(r.v_, a.v_, MPFR_RNDN); return r; }
    friend Real sin(const Real& a) { Real r; mpfr_sin(r.v_, a.v_, MPFR_RNDN); return r; }
    friend Real cos(const Real& a) { Real r; mpfr_cos(r.v_, a.v_, MPFR_RNDN); return r; }
    friend Real hypot(const Real& a, const Real& b) { Real r; mpfr_hypot(r.v_, a.v_, b.v_, MPFR_RNDN); return r; }

    friend bool operator<(const Real& a, const Real& b) { return mpfr_cmp(a.v_, b.v_) < 0; }
    friend bool operator>(const Real& a, const Real& b) { return mpfr_cmp(a.v_, b.v_) > 0; }
    bool is_zero() const { return mpfr_zero_p(v_) != 0; }

  private:
    mutable mpfr_t v_;
};

/// Complex arithmetic on top of Real; only what the scheme analysis needs.
struct Cplx {
    Real re, im;

    Cplx() = default;
    Cplx(Real r, Real i) : re(std::move(r)), im(std::move(i)) {}
    explicit Cplx(std::complex<double> z) : re(z.real()), im(z.imag()) {}
    explicit Cplx(double x) : re(x), im(0.0) {}

    friend Cplx operator+(const Cplx& a, const Cplx& b) { return {a.re + b.re, a.im + b.im}; }
    friend Cplx operator-(const Cplx& a, const Cplx& b) { return {a.re - b.re, a.im - b.im}; }
    friend Cplx operator*(const Cplx& a, const Cplx& b) {
        return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
    }
    friend Cplx operator/(const Cplx& a, const Cplx& b) {
        Real d = b.re * b.re + b.im * b.im;
        return {(a.re * b.re + a.im * b.im) / d, (a.im * b.re - a.re * b.im) / d};
    }

    friend Real abs(const Cplx& a) { return hypot(a.re, a.im); }

    /// exp(-z) for complex z.
    static Cplx exp_neg(const Cplx& z) {
        Real m = exp(-z.re);
        return {m * cos(z.im), -(m * sin(z.im))};
    }

    Cplx pow_int(long n) const {
        Cplx base = *this, acc(Real(1L), Real(0L));
        for (long k = n; k > 0; k >>= 1) {
            if (k & 1) acc = acc * base;
            base = base * base;
        }
        return acc;
    }
};

}  // namespace dsmr::detail
