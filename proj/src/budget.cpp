// Multiple-precision pieces of the trivial-classifier budget analysis.

#include "rsacr/certify.hpp"

#include <gmp.h>
#include <mpfr.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace rsacr {
namespace {

class MpReal {
public:
    explicit MpReal(mpfr_prec_t bits) { mpfr_init2(v_, bits); }
    MpReal(mpfr_prec_t bits, double value) : MpReal(bits) { mpfr_set_d(v_, value, MPFR_RNDN); }
    ~MpReal() { mpfr_clear(v_); }
    MpReal(const MpReal&) = delete;
    MpReal& operator=(const MpReal&) = delete;

    mpfr_ptr get() { return v_; }
    mpfr_srcptr get() const { return v_; }

private:
    mpfr_t v_;
};

void check_args(double target, int num_classes, double sigma, double alpha) {
    if (!(target > 0.0) || !std::isfinite(target)) {
        throw std::invalid_argument("target ACR must be a positive finite number");
    }
    if (num_classes < 2) throw std::invalid_argument("need >= 2 classes");
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
}

// Decimal digits of -log10(1 - Phi(z)), a lower bound on the digits of n.
double tail_digits(double z) {
    if (z <= 0.0) return 1.0;
    return (0.5 * z * z + std::log(z + 1.0) + 1.0) / std::log(10.0) + 1.0;
}

mpfr_prec_t bits_for_digits(double digits) {
    return static_cast<mpfr_prec_t>(std::ceil(digits * 3.33)) + 64;
}

// Phi(target * K / sigma) at the given precision.
void normal_cdf_of_target(MpReal& out, double target, int num_classes, double sigma) {
    const mpfr_prec_t bits = mpfr_get_prec(out.get());
    MpReal z(bits, target);
    mpfr_mul_si(z.get(), z.get(), num_classes, MPFR_RNDN);
    mpfr_div_d(z.get(), z.get(), sigma, MPFR_RNDN);
    MpReal root2(bits, 2.0);
    mpfr_sqrt(root2.get(), root2.get(), MPFR_RNDN);
    mpfr_div(z.get(), z.get(), root2.get(), MPFR_RNDN);
    mpfr_erfc(out.get(), z.get(), MPFR_RNDN);    // erfc(z / sqrt 2) = 2 (1 - Phi(z))
    mpfr_div_2ui(out.get(), out.get(), 1, MPFR_RNDN);
    mpfr_ui_sub(out.get(), 1, out.get(), MPFR_RNDN);
}

BigInt to_bigint(const MpReal& integral) {
    mpz_t z;
    mpz_init(z);
    mpfr_get_z(z, integral.get(), MPFR_RNDN);
    char* text = mpz_get_str(nullptr, 10, z);
    BigInt out(text);
    void (*free_fn)(void*, size_t) = nullptr;
    mp_get_memory_functions(nullptr, nullptr, &free_fn);
    free_fn(text, std::strlen(text) + 1);
    mpz_clear(z);
    return out;
}

void set_from_bigint(MpReal& out, const BigInt& n) {
    mpfr_set_str(out.get(), n.str().c_str(), 10, MPFR_RNDN);
}

}  // namespace

bool trivial_bound_exceeds(const BigInt& n, double target, int num_classes, double sigma,
                           double alpha) {
    check_args(target, num_classes, sigma, alpha);
    if (n <= 0) return false;
    const double n_digits = static_cast<double>(n.str().size());
    const mpfr_prec_t bits =
        bits_for_digits(2.0 * std::max(n_digits, tail_digits(target * num_classes / sigma)) + 40.0);

    // alpha^{1/n} > Phi(target K / sigma)  <=>  bound(n) > target
    MpReal root(bits, alpha);
    mpfr_log(root.get(), root.get(), MPFR_RNDN);
    MpReal nn(bits);
    set_from_bigint(nn, n);
    mpfr_div(root.get(), root.get(), nn.get(), MPFR_RNDN);
    mpfr_exp(root.get(), root.get(), MPFR_RNDN);

    MpReal threshold(bits);
    normal_cdf_of_target(threshold, target, num_classes, sigma);
    return mpfr_cmp(root.get(), threshold.get()) > 0;
}

BigInt budget_for_target_acr(double target, int num_classes, double sigma, double alpha) {
    check_args(target, num_classes, sigma, alpha);
    const mpfr_prec_t bits =
        bits_for_digits(2.0 * tail_digits(target * num_classes / sigma) + 40.0);

    // ceil(log(alpha) / log(Phi(MK / sigma))) + 1
    MpReal log_phi(bits);
    normal_cdf_of_target(log_phi, target, num_classes, sigma);
    mpfr_log(log_phi.get(), log_phi.get(), MPFR_RNDN);
    MpReal ratio(bits, alpha);
    mpfr_log(ratio.get(), ratio.get(), MPFR_RNDN);
    mpfr_div(ratio.get(), ratio.get(), log_phi.get(), MPFR_RNDN);
    mpfr_ceil(ratio.get(), ratio.get());

    BigInt n = to_bigint(ratio);
    n += 1;
    if (n < 1) n = 1;

    // The closed form is only a starting point: the contract is the inequality.
    while (n > 1 && trivial_bound_exceeds(n - 1, target, num_classes, sigma, alpha)) --n;
    while (!trivial_bound_exceeds(n, target, num_classes, sigma, alpha)) ++n;
    return n;
}

}  // namespace rsacr
