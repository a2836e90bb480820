//! Modified Bessel functions of the second kind, orders 0 and 1.
//!
//! Ascending series for `x <= 2`, Steed's continued fraction (Temme's CF2)
//! above. Both branches are accurate to a few ulps in `f64`.

use crate::scalar::Real;

const SERIES_LIMIT: f64 = 2.0;
const MAX_TERMS: usize = 500;

/// `K_0(x)` for `x > 0`. Returns `+inf` at zero and `NaN` for negative input.
pub fn bessel_k0<T: Real>(x: T) -> T {
    if x < T::zero() || x.is_nan() {
        return T::nan();
    }
    if x == T::zero() {
        return T::infinity();
    }
    if x <= T::lit(SERIES_LIMIT) {
        k_series(x).0
    } else {
        k_continued_fraction(x).0
    }
}

/// `K_1(x)` for `x > 0`. Returns `+inf` at zero and `NaN` for negative input.
pub fn bessel_k1<T: Real>(x: T) -> T {
    if x < T::zero() || x.is_nan() {
        return T::nan();
    }
    if x == T::zero() {
        return T::infinity();
    }
    if x <= T::lit(SERIES_LIMIT) {
        k_series(x).1
    } else {
        k_continued_fraction(x).1
    }
}

/// `x K_1(x)`, continuous at zero where it equals 1.
pub fn x_bessel_k1<T: Real>(x: T) -> T {
    if x == T::zero() {
        T::one()
    } else {
        x * bessel_k1(x)
    }
}

// (K0, K1) from the ascending series
//   K0 = -(ln(x/2) + γ) I0 + Σ H_k y^k / (k!)^2
//   K1 = 1/x + ln(x/2) I1 - (x/4) Σ (ψ(k+1) + ψ(k+2)) y^k / (k! (k+1)!)
// with y = x²/4.
fn k_series<T: Real>(x: T) -> (T, T) {
    let euler = T::lit(0.577_215_664_901_532_9);
    let half = T::lit(0.5);
    let y = x * x * T::lit(0.25);
    let ln_half_x = (x * half).ln();

    let mut term0 = T::one(); // y^k / (k!)^2
    let mut term1 = T::one(); // y^k / (k! (k+1)!)
    let mut i0 = T::zero();
    let mut i1 = T::zero();
    let mut s0 = T::zero();
    let mut s1 = T::zero();
    let mut harmonic = T::zero(); // H_k
    let mut psi_k1 = -euler; // ψ(k+1)
    let mut psi_k2 = T::one() - euler; // ψ(k+2)

    for k in 0..MAX_TERMS {
        i0 += term0;
        i1 += term1;
        s0 += harmonic * term0;
        s1 += (psi_k1 + psi_k2) * term1;

        let kf = T::from_usize_lossy(k);
        let next0 = term0 * y / ((kf + T::one()) * (kf + T::one()));
        let next1 = term1 * y / ((kf + T::one()) * (kf + T::lit(2.0)));
        if next0 < T::epsilon() * i0 * T::lit(0.01) && next1 < T::epsilon() * i1 * T::lit(0.01) {
            break;
        }
        term0 = next0;
        term1 = next1;
        harmonic += T::one() / (kf + T::one());
        psi_k1 += T::one() / (kf + T::one());
        psi_k2 += T::one() / (kf + T::lit(2.0));
    }

    let i1 = i1 * x * half;
    let k0 = -(ln_half_x + euler) * i0 + s0;
    let k1 = T::one() / x + ln_half_x * i1 - x * T::lit(0.25) * s1;
    (k0, k1)
}

// Steed's algorithm for K_mu, K_{mu+1} at mu = 0.
fn k_continued_fraction<T: Real>(x: T) -> (T, T) {
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let eps = T::epsilon();

    let mut b = two * (T::one() + x);
    let mut d = T::one() / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = T::zero();
    let mut q2 = T::one();
    let a1 = T::lit(0.25);
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = T::one() + q * delh;

    for i in 2..MAX_TERMS {
        let fi = T::from_usize_lossy(i);
        a -= two * (fi - T::one());
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += two;
        d = T::one() / (b + a * d);
        delh = (b * d - T::one()) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < eps {
            break;
        }
    }
    h = a1 * h;
    let k0 = (T::PI() / (two * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + half - h) / x;
    (k0, k1)
}
