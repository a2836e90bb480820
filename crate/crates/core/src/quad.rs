//! Adaptive Gauss–Kronrod quadrature.
//!
//! Globally adaptive bisection driven by the 10-point Gauss / 21-point
//! Kronrod pair, with the usual QUADPACK error rescaling. The subdivision
//! order is fully determined by the integrand values, so repeated runs
//! produce bit-identical results.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208620617407,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

/// Stopping rule for the adaptive integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance<T> {
    pub rel: T,
    pub abs: T,
    pub max_intervals: usize,
}

impl<T: Real> Default for Tolerance<T> {
    fn default() -> Self {
        Tolerance {
            rel: T::default_rel_tol(),
            abs: T::default_abs_tol(),
            max_intervals: 2000,
        }
    }
}

impl<T: Real> Tolerance<T> {
    pub fn new(rel: T, abs: T) -> Self {
        Tolerance {
            rel,
            abs,
            ..Self::default()
        }
    }

    /// Same tolerance scaled down by `factor`, for nested inner integrals.
    pub fn tighter(&self, factor: T) -> Self {
        Tolerance {
            rel: (self.rel / factor).max(T::epsilon() * T::lit(16.0)),
            abs: self.abs / factor,
            max_intervals: self.max_intervals,
        }
    }

    fn target(&self, value: T) -> T {
        self.abs.max(self.rel * value.abs())
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
    /// Estimate of the integral of `|f|`.
    pub abs_value: T,
    pub converged: bool,
    pub evaluations: usize,
}

impl<T: Real> Estimate<T> {
    pub fn zero() -> Self {
        Estimate {
            value: T::zero(),
            error: T::zero(),
            abs_value: T::zero(),
            converged: true,
            evaluations: 0,
        }
    }

    /// Converts a non-converged estimate into a [`Error::NumericFailure`].
    pub fn into_result(self, context: &str) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NumericFailure {
                context: context.to_string(),
                estimate: self.value.as_f64(),
                error: self.error.as_f64(),
            })
        }
    }
}

#[derive(Clone, Copy)]
struct Piece<T> {
    a: T,
    b: T,
    value: T,
    error: T,
    abs_value: T,
}

fn rescale_error<T: Real>(err: T, res_abs: T, res_asc: T) -> T {
    let mut err = err.abs();
    if res_asc != T::zero() && err != T::zero() {
        let scale = (T::lit(200.0) * err / res_asc).powf(T::lit(1.5));
        err = if scale < T::one() { res_asc * scale } else { res_asc };
    }
    let floor = T::lit(50.0) * T::epsilon() * res_abs;
    if res_abs > T::min_positive_value() / (T::lit(50.0) * T::epsilon()) && floor > err {
        err = floor;
    }
    err
}

fn kronrod21<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> Piece<T> {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let f_center = f(center);

    let mut res_gauss = T::zero();
    let mut res_kronrod = f_center * T::lit(WGK[10]);
    let mut res_abs = res_kronrod.abs();
    let mut fv1 = [T::zero(); 10];
    let mut fv2 = [T::zero(); 10];

    for j in 0..5 {
        let jtw = 2 * j + 1;
        let x = half_len * T::lit(XGK[jtw]);
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_gauss += T::lit(WG[j]) * (f1 + f2);
        res_kronrod += T::lit(WGK[jtw]) * (f1 + f2);
        res_abs += T::lit(WGK[jtw]) * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let x = half_len * T::lit(XGK[jtwm1]);
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        res_kronrod += T::lit(WGK[jtwm1]) * (f1 + f2);
        res_abs += T::lit(WGK[jtwm1]) * (f1.abs() + f2.abs());
    }

    let mean = res_kronrod * half;
    let mut res_asc = T::lit(WGK[10]) * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += T::lit(WGK[j]) * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let err = (res_kronrod - res_gauss) * half_len;
    let abs_half = half_len.abs();
    Piece {
        a,
        b,
        value: res_kronrod * half_len,
        error: rescale_error(err, res_abs * abs_half, res_asc * abs_half),
        abs_value: res_abs * abs_half,
    }
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<T: Real, F: FnMut(T) -> T>(f: F, a: T, b: T, tol: &Tolerance<T>) -> Estimate<T> {
    integrate_pieces(f, &[a, b], tol)
}

/// Integrates `f` over `[points[0], points[last]]`, using the given
/// breakpoints as the initial partition.
pub fn integrate_pieces<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    points: &[T],
    tol: &Tolerance<T>,
) -> Estimate<T> {
    if points.len() < 2 || points[0] == points[points.len() - 1] {
        return Estimate::zero();
    }
    let mut pieces: Vec<Piece<T>> = points
        .windows(2)
        .filter(|w| w[0] != w[1])
        .map(|w| kronrod21(&mut f, w[0], w[1]))
        .collect();
    let mut evaluations = 21 * pieces.len();

    loop {
        let value: T = pieces.iter().map(|p| p.value).sum();
        let error: T = pieces.iter().map(|p| p.error).sum();
        let abs_value: T = pieces.iter().map(|p| p.abs_value).sum();
        // The second test accepts an error already at the roundoff floor of
        // ∫|f|; refining cannot improve a cancelling integral further.
        if error <= tol.target(value) || error <= T::lit(100.0) * T::epsilon() * abs_value {
            return Estimate {
                value,
                error,
                abs_value,
                converged: true,
                evaluations,
            };
        }

        // Deterministic choice: first interval with the largest error.
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |(bi, be), (i, p)| {
                if p.error > be {
                    (i, p.error)
                } else {
                    (bi, be)
                }
            });
        let p = pieces[worst];
        let mid = T::lit(0.5) * (p.a + p.b);
        let width_floor = (T::lit(100.0) * T::epsilon() * p.a.abs().max(p.b.abs()))
            .max(T::min_positive_value());
        if pieces.len() >= tol.max_intervals || (p.b - p.a).abs() <= width_floor {
            return Estimate {
                value,
                error,
                abs_value,
                converged: false,
                evaluations,
            };
        }
        let left = kronrod21(&mut f, p.a, mid);
        let right = kronrod21(&mut f, mid, p.b);
        evaluations += 42;
        pieces[worst] = left;
        pieces.insert(worst + 1, right);
    }
}

/// Integrates `f` over `[a, inf)` through the map `s = a + t / (1 - t)`.
pub fn integrate_to_infinity<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    tol: &Tolerance<T>,
) -> Estimate<T> {
    let one = T::one();
    let mapped = |t: T| {
        let u = one - t;
        let s = a + t / u;
        let v = f(s);
        if v == T::zero() {
            v
        } else {
            v / (u * u)
        }
    };
    // Breakpoints at s - a = 1, 10, 100 keep the first pass from missing
    // structure that the map compresses toward t = 1.
    let pts = [0.0, 0.5, 10.0 / 11.0, 100.0 / 101.0, 1.0].map(T::lit);
    integrate_pieces(mapped, &pts, tol)
}

/// Fixed rule: `panels` equal panels on `[a, b]`, each with the given
/// Gauss–Legendre `nodes` and `weights` on `[-1, 1]`.
pub fn composite_gauss_legendre<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    panels: usize,
    nodes: &[T],
    weights: &[T],
) -> T {
    let h = (b - a) / T::from_usize_lossy(panels.max(1));
    let half = T::lit(0.5) * h;
    let mut total = T::zero();
    for i in 0..panels.max(1) {
        let c = a + h * (T::from_usize_lossy(i) + T::lit(0.5));
        let mut panel = T::zero();
        for (x, w) in nodes.iter().zip(weights) {
            panel += *w * f(c + half * *x);
        }
        total += panel * half;
    }
    total
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, computed by Newton
/// iteration on the Legendre recurrence.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Work in f64 and round once at the end.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0_f64, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = T::lit(-x);
        nodes[n - 1 - i] = T::lit(x);
        weights[i] = T::lit(w);
        weights[n - 1 - i] = T::lit(w);
    }
    (nodes, weights)
}
