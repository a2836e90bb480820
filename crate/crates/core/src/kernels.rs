//! Free two-point kernels and their spectral superpositions.
//!
//! Momentum pairings are normalized as
//! `W(f) = ∫dρ(s) ∫d³p f̃(ω, p) / ω` with `ω = sqrt(p² + s)`, with no
//! `2(2π)³` factor. The position-space kernel of a unit atom is
//! [`PAIRING_TO_POSITION`] times the Fourier transform of that measure.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::bessel::x_bessel_k1;
use crate::error::{Error, Result};
use crate::measures::{integrate_unbounded, Channel, SpectralMeasure};
use crate::quad::{self, Estimate, Tolerance};
use crate::scalar::Real;

/// `1 / (2 (2π)³)`: converts the momentum pairing measure `d³p/ω` into the
/// position-space two-point function.
pub const PAIRING_TO_POSITION: f64 = 1.0 / (16.0 * std::f64::consts::PI * std::f64::consts::PI * std::f64::consts::PI);

// Gaussian tails are dropped beyond this many widths (exp(-81/2) ≈ 2.6e-18).
const TAIL_WIDTHS: f64 = 9.0;

/// Spacelike value of the free two-point function of mass `m` at invariant
/// distance `r`: `m K₁(m r) / (4π² r)`, and `1 / (4π² r²)` for `m = 0`.
pub fn delta_plus_spacelike<T: Real>(m: T, r: T) -> Result<T> {
    if !(r.is_finite() && r > T::zero()) {
        return Err(Error::domain(format!(
            "spacelike distance must be finite and > 0, got {r} (timelike and lightlike points are distributional)"
        )));
    }
    if !(m.is_finite() && m >= T::zero()) {
        return Err(Error::domain(format!("mass must be finite and >= 0, got {m}")));
    }
    let four_pi2 = T::lit(4.0) * T::PI() * T::PI();
    Ok(x_bessel_k1(m * r) / (four_pi2 * r * r))
}

/// `∫dρ(s) Δ(√s, r)` at spacelike distance `r`.
pub fn kl_spacelike<T: Real>(measure: &SpectralMeasure<T>, r: T, tol: &Tolerance<T>) -> Result<KernelValue<T>> {
    delta_plus_spacelike(T::zero(), r)?;
    let mut value = T::zero();
    for a in measure.atoms() {
        value += a.weight * delta_plus_spacelike(a.mass2.sqrt(), r)?;
    }
    let density = measure.density();
    if density.is_zero() {
        return Ok(KernelValue::new(value, T::zero()));
    }
    let start = density.support_start();
    let end = measure.support_end();
    let kernel = |s: T| density.value(s) * delta_plus_spacelike(s.sqrt(), r).unwrap_or_else(|_| T::zero());
    let est = if end.is_finite() {
        quad::integrate_pieces(kernel, &density.breakpoints(start, end), tol)
    } else {
        integrate_unbounded(kernel, &density.breakpoints(start, T::infinity()), tol)
    };
    let est = est.into_result("position-space spectral superposition")?;
    Ok(KernelValue::new(value + est.value, est.error))
}

/// A computed pairing and its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct KernelValue<T> {
    pub value: T,
    pub quadrature_error: T,
}

impl<T: Real> KernelValue<T> {
    pub fn new(value: T, quadrature_error: T) -> Self {
        KernelValue {
            value,
            quadrature_error,
        }
    }
}

/// How a momentum-space function depends on the direction of `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    /// Depends on `(p⁰, |p|)` only.
    Isotropic,
    /// Radial part times a polynomial in `p̂` of at most this degree.
    Separable { angular_degree: u32 },
    General,
}

/// Where a momentum-space function is non-negligible.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportHint<T> {
    /// `f̃` is negligible for `p⁰` outside this interval.
    pub omega_range: (T, T),
    /// `f̃` is negligible for `|p|` above this.
    pub radius: T,
    /// Energies and radii where the integrand has structure.
    pub omega_breaks: Vec<T>,
    pub radial_breaks: Vec<T>,
}

/// A function of four-momentum that can be paired with a kernel.
pub trait MomentumTestFunction<T: Real>: Sync {
    fn eval(&self, p0: T, p: [T; 3]) -> T;
    fn structure(&self) -> Structure;
    fn support(&self) -> SupportHint<T>;

    /// For isotropic and separable structures, `f̃(p⁰, |p| n̂)` factors as
    /// `radial_factor(p⁰, |p|) · angular_factor(n̂)`. The defaults suit
    /// isotropic functions.
    fn radial_factor(&self, p0: T, p_norm: T) -> T {
        self.eval(p0, [T::zero(), T::zero(), p_norm])
    }

    fn angular_factor(&self, _n: [T; 3]) -> T {
        T::one()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TestFamily {
    Gaussian,
    GaussianTimesPolynomial,
}

/// Serialized form of [`TestFunction`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TestFunctionDocument<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    pub family: TestFamily,
    pub center: [T; 4],
    pub widths: [T; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<[u32; 4]>,
}

pub const TEST_FUNCTION_SCHEMA: &str = "klspec/testFunction/v1";

/// Gaussian test function given in momentum space,
/// `f̃(p) = exp(-(p⁰-a)²/(2w₀²) - |p-b|²/(2w²)) · Π (p^μ)^{n_μ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "TestFunctionDocument<T>",
    into = "TestFunctionDocument<T>",
    bound(
        serialize = "T: Real + Serialize",
        deserialize = "T: Real + serde::de::DeserializeOwned"
    )
)]
pub struct TestFunction<T: Real> {
    family: TestFamily,
    center: [T; 4],
    widths: [T; 2],
    exponents: [u32; 4],
}

impl<T: Real> TryFrom<TestFunctionDocument<T>> for TestFunction<T> {
    type Error = Error;

    fn try_from(doc: TestFunctionDocument<T>) -> Result<Self> {
        if let Some(schema) = &doc.schema {
            if schema != TEST_FUNCTION_SCHEMA {
                return Err(Error::validation(format!(
                    "unknown test function schema {schema:?}, expected {TEST_FUNCTION_SCHEMA:?}"
                )));
            }
        }
        match (doc.family, doc.exponents) {
            (TestFamily::Gaussian, Some(_)) => Err(Error::validation(
                "test function: the gaussian family takes no exponents",
            )),
            (TestFamily::Gaussian, None) => TestFunction::gaussian(doc.center, doc.widths),
            (TestFamily::GaussianTimesPolynomial, Some(n)) => {
                TestFunction::gaussian_times_polynomial(doc.center, doc.widths, n)
            }
            (TestFamily::GaussianTimesPolynomial, None) => Err(Error::validation(
                "test function: gaussianTimesPolynomial needs exponents",
            )),
        }
    }
}

impl<T: Real> From<TestFunction<T>> for TestFunctionDocument<T> {
    fn from(f: TestFunction<T>) -> Self {
        TestFunctionDocument {
            schema: Some(TEST_FUNCTION_SCHEMA.to_string()),
            family: f.family,
            center: f.center,
            widths: f.widths,
            exponents: match f.family {
                TestFamily::Gaussian => None,
                TestFamily::GaussianTimesPolynomial => Some(f.exponents),
            },
        }
    }
}

const MAX_EXPONENT: u32 = 16;

impl<T: Real> TestFunction<T> {
    pub fn gaussian(center: [T; 4], widths: [T; 2]) -> Result<Self> {
        Self::build(TestFamily::Gaussian, center, widths, [0; 4])
    }

    /// Gaussian centered at energy `a` and zero spatial momentum.
    pub fn isotropic(a: T, w0: T, w: T) -> Result<Self> {
        Self::gaussian([a, T::zero(), T::zero(), T::zero()], [w0, w])
    }

    pub fn gaussian_times_polynomial(center: [T; 4], widths: [T; 2], exponents: [u32; 4]) -> Result<Self> {
        Self::build(TestFamily::GaussianTimesPolynomial, center, widths, exponents)
    }

    fn build(family: TestFamily, center: [T; 4], widths: [T; 2], exponents: [u32; 4]) -> Result<Self> {
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::validation("test function: center must be finite"));
        }
        if widths.iter().any(|w| !(w.is_finite() && *w > T::zero())) {
            return Err(Error::validation("test function: widths must be finite and > 0"));
        }
        if exponents.iter().any(|&n| n > MAX_EXPONENT) {
            return Err(Error::validation(format!(
                "test function: exponents above {MAX_EXPONENT} are not supported"
            )));
        }
        Ok(TestFunction {
            family,
            center,
            widths,
            exponents,
        })
    }

    pub fn family(&self) -> TestFamily {
        self.family
    }

    pub fn center(&self) -> [T; 4] {
        self.center
    }

    pub fn widths(&self) -> [T; 2] {
        self.widths
    }

    pub fn exponents(&self) -> [u32; 4] {
        self.exponents
    }

    // exp(-(p⁰-a)²/(2w₀²) - p²/(2w²)) (p⁰)^{n₀}, valid for a centered function.
    fn gaussian_radial(&self, p0: T, p_norm: T) -> T {
        let a = self.center[0];
        let [w0, w] = self.widths;
        let half = T::lit(0.5);
        let d0 = (p0 - a) / w0;
        let d = p_norm / w;
        (-half * d0 * d0 - half * d * d).exp() * p0.powi(self.exponents[0] as i32)
    }

    fn spatial_center_norm(&self) -> T {
        let [_, bx, by, bz] = self.center;
        (bx * bx + by * by + bz * bz).sqrt()
    }
}

impl<T: Real> MomentumTestFunction<T> for TestFunction<T> {
    fn eval(&self, p0: T, p: [T; 3]) -> T {
        let [a, bx, by, bz] = self.center;
        let [w0, w] = self.widths;
        let half = T::lit(0.5);
        let d0 = (p0 - a) / w0;
        let (dx, dy, dz) = (p[0] - bx, p[1] - by, p[2] - bz);
        let g = (-half * d0 * d0 - half * (dx * dx + dy * dy + dz * dz) / (w * w)).exp();
        if self.exponents == [0; 4] {
            return g;
        }
        let [n0, n1, n2, n3] = self.exponents;
        g * p0.powi(n0 as i32) * p[0].powi(n1 as i32) * p[1].powi(n2 as i32) * p[2].powi(n3 as i32)
    }

    fn radial_factor(&self, p0: T, p_norm: T) -> T {
        let degree = self.exponents[1] + self.exponents[2] + self.exponents[3];
        self.gaussian_radial(p0, p_norm) * p_norm.powi(degree as i32)
    }

    fn angular_factor(&self, n: [T; 3]) -> T {
        let [_, n1, n2, n3] = self.exponents;
        n[0].powi(n1 as i32) * n[1].powi(n2 as i32) * n[2].powi(n3 as i32)
    }

    fn structure(&self) -> Structure {
        let [_, bx, by, bz] = self.center;
        let centered = bx == T::zero() && by == T::zero() && bz == T::zero();
        let degree = self.exponents[1] + self.exponents[2] + self.exponents[3];
        match (centered, degree) {
            (true, 0) => Structure::Isotropic,
            (true, d) => Structure::Separable { angular_degree: d },
            (false, _) => Structure::General,
        }
    }

    fn support(&self) -> SupportHint<T> {
        let a = self.center[0];
        let [w0, w] = self.widths;
        let tail = T::lit(TAIL_WIDTHS);
        let n0 = T::from_usize_lossy(self.exponents[0] as usize);
        let ns = T::from_usize_lossy((self.exponents[1] + self.exponents[2] + self.exponents[3]) as usize);
        // A factor x^n shifts the gaussian tail out by about sqrt(n) widths.
        let reach0 = (tail + n0.sqrt()) * w0;
        let reach = (tail + ns.sqrt()) * w;
        let b = self.spatial_center_norm();
        let omega_breaks = [-3.0, -1.0, 0.0, 1.0, 3.0]
            .iter()
            .map(|&k| a + T::lit(k) * w0)
            .collect();
        let radial_breaks = if b > T::zero() {
            [-3.0, -1.0, 0.0, 1.0, 3.0].iter().map(|&k| b + T::lit(k) * w).collect()
        } else {
            [1.0, 3.0].iter().map(|&k| T::lit(k) * w).collect()
        };
        SupportHint {
            omega_range: (a - reach0, a + reach0),
            radius: b + reach,
            omega_breaks,
            radial_breaks,
        }
    }
}

/// Angular product rule exact for polynomials in `p̂` up to `degree`:
/// Gauss–Legendre in `cos θ` times the trapezoid rule in `φ`.
#[derive(Debug, Clone)]
pub(crate) struct SphereRule<T> {
    pub directions: Vec<[T; 3]>,
    pub weights: Vec<T>,
}

impl<T: Real> SphereRule<T> {
    pub fn new(degree: u32) -> Self {
        let n_theta = degree as usize / 2 + 1;
        let n_phi = degree as usize + 1;
        let (us, ws) = quad::gauss_legendre::<T>(n_theta);
        let two_pi = T::lit(2.0) * T::PI();
        let dphi = two_pi / T::from_usize_lossy(n_phi);
        let mut directions = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (u, wu) in us.iter().zip(&ws) {
            let st = (T::one() - *u * *u).max(T::zero()).sqrt();
            for j in 0..n_phi {
                let phi = dphi * T::from_usize_lossy(j);
                directions.push([st * phi.cos(), st * phi.sin(), *u]);
                weights.push(*wu * dphi);
            }
        }
        SphereRule { directions, weights }
    }
}

/// A kernel factor `K(ω, p)` multiplying `f̃` on the mass shell, together
/// with its polynomial degree in `p̂`.
pub(crate) struct ShellKernel<K> {
    pub factor: K,
    pub angular_degree: u32,
}

/// `∫d³p K(ω, p) f̃(ω, p)` on the shell `ω = sqrt(p² + mass2)`.
pub(crate) fn shell_integral<T, F, K>(
    f: &F,
    mass2: T,
    kernel: &ShellKernel<K>,
    tol: &Tolerance<T>,
) -> Estimate<T>
where
    T: Real,
    F: MomentumTestFunction<T> + ?Sized,
    K: Fn(T, [T; 3]) -> T,
{
    let hint = f.support();
    let (w_lo, w_hi) = hint.omega_range;
    if w_hi <= T::zero() || w_hi * w_hi <= mass2 {
        return Estimate::zero();
    }
    let p_hi = hint.radius.min((w_hi * w_hi - mass2).sqrt());
    let p_lo = if w_lo > T::zero() && w_lo * w_lo > mass2 {
        (w_lo * w_lo - mass2).sqrt()
    } else {
        T::zero()
    };
    if p_hi <= p_lo {
        return Estimate::zero();
    }
    let mut pts = vec![p_lo, p_hi];
    for &w in &hint.omega_breaks {
        if w > T::zero() && w * w > mass2 {
            pts.push((w * w - mass2).sqrt());
        }
    }
    pts.extend(hint.radial_breaks.iter().copied());
    pts.retain(|p| *p >= p_lo && *p <= p_hi);
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    pts.dedup();

    let omega = |p: T| (p * p + mass2).sqrt();
    let point = |p: T, n: &[T; 3]| [p * n[0], p * n[1], p * n[2]];
    match f.structure() {
        Structure::Isotropic | Structure::Separable { .. } => {
            let d = match f.structure() {
                Structure::Separable { angular_degree } => angular_degree,
                _ => 0,
            };
            let rule = SphereRule::<T>::new(d + kernel.angular_degree);
            let angular: Vec<T> = rule
                .directions
                .iter()
                .zip(&rule.weights)
                .map(|(n, wt)| *wt * f.angular_factor(*n))
                .collect();
            let radial = |p: T| {
                let w = omega(p);
                let r = f.radial_factor(w, p);
                if r == T::zero() {
                    return T::zero();
                }
                let mut acc = T::zero();
                for (n, wa) in rule.directions.iter().zip(&angular) {
                    acc += *wa * (kernel.factor)(w, point(p, n));
                }
                p * p * r * acc
            };
            quad::integrate_pieces(radial, &pts, tol)
        }
        Structure::General => {
            let inner_tol = tol.tighter(T::lit(10.0));
            let worst = Cell::new(T::zero());
            let ok = Cell::new(true);
            let two_pi = T::lit(2.0) * T::PI();
            let radial = |p: T| {
                let w = omega(p);
                let polar = |u: T| {
                    let st = (T::one() - u * u).max(T::zero()).sqrt();
                    let azimuth = |phi: T| {
                        let q = [p * st * phi.cos(), p * st * phi.sin(), p * u];
                        (kernel.factor)(w, q) * f.eval(w, q)
                    };
                    let e = quad::integrate(azimuth, T::zero(), two_pi, &inner_tol);
                    note_inner(&worst, &ok, &e);
                    e.value
                };
                let e = quad::integrate(polar, -T::one(), T::one(), &inner_tol);
                note_inner(&worst, &ok, &e);
                p * p * e.value
            };
            let mut est = quad::integrate_pieces(radial, &pts, tol);
            est.error += worst.get() * est.abs_value;
            est.converged &= ok.get();
            est
        }
    }
}

fn note_inner<T: Real>(worst: &Cell<T>, ok: &Cell<bool>, e: &Estimate<T>) {
    if e.abs_value > T::zero() {
        worst.set(worst.get().max(e.error / e.abs_value));
    }
    if !e.converged {
        ok.set(false);
    }
}

/// `λ⁻² ∫dρ(s) ∫d³p K f̃` with the shell at `ω² = p² + λ² s`.
pub(crate) fn measure_pairing<T, F, K>(
    measure: &SpectralMeasure<T>,
    f: &F,
    kernel: &ShellKernel<K>,
    lambda: T,
    tol: &Tolerance<T>,
    context: &str,
) -> Result<KernelValue<T>>
where
    T: Real,
    F: MomentumTestFunction<T> + ?Sized,
    K: Fn(T, [T; 3]) -> T,
{
    if !(lambda.is_finite() && lambda > T::zero() && lambda <= T::one()) {
        return Err(Error::domain(format!("scale lambda must lie in (0, 1], got {lambda}")));
    }
    let l2 = lambda * lambda;
    let inner_tol = tol.tighter(T::lit(10.0));
    let mut value = T::zero();
    let mut error = T::zero();
    for a in measure.atoms() {
        if a.weight == T::zero() {
            continue;
        }
        let e = shell_integral(f, l2 * a.mass2, kernel, tol).into_result(context)?;
        value += a.weight * e.value;
        error += a.weight * e.error;
    }

    let density = measure.density();
    if !density.is_zero() {
        let start = density.support_start();
        let (_, w_hi) = f.support().omega_range;
        // Beyond λ² s = ω_max² the shell misses the support of f̃.
        let reach = if w_hi > T::zero() { w_hi * w_hi / l2 } else { T::zero() };
        let end = measure.support_end().min(reach);
        if end > start {
            let mut pts = density.breakpoints(start, end);
            for &w in &f.support().omega_breaks {
                let s = w * w / l2;
                if w > T::zero() && s > start && s < end {
                    pts.push(s);
                }
            }
            pts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
            pts.dedup();
            let worst = Cell::new(T::zero());
            let ok = Cell::new(true);
            let integrand = |s: T| {
                let rho = density.value(s);
                if rho == T::zero() {
                    return T::zero();
                }
                let e = shell_integral(f, l2 * s, kernel, &inner_tol);
                note_inner(&worst, &ok, &e);
                rho * e.value
            };
            let mut est = quad::integrate_pieces(integrand, &pts, tol);
            est.error += worst.get() * est.abs_value;
            est.converged &= ok.get();
            let est = est.into_result(context)?;
            value += est.value;
            error += est.error;
        }
    }
    let scale = T::one() / l2;
    Ok(KernelValue::new(value * scale, error * scale))
}

fn scalar_kernel<T: Real>() -> ShellKernel<impl Fn(T, [T; 3]) -> T> {
    ShellKernel {
        factor: |w: T, _p: [T; 3]| if w > T::zero() { T::one() / w } else { T::zero() },
        angular_degree: 0,
    }
}

fn require_scalar<T: Real>(measure: &SpectralMeasure<T>) -> Result<()> {
    match measure.channel() {
        Channel::Scalar => Ok(()),
        Channel::PhotonFieldStrength => Err(Error::validation(
            "photon field-strength measures pair through the photon kernel",
        )),
        c => Err(Error::Unsupported(format!("kernel evaluation for the {c} channel"))),
    }
}

/// `W₊(f) = ∫dρ(s) ∫d³p f̃(ω, p)/ω`, `ω = sqrt(p² + s)`.
pub fn smeared_w<T: Real, F: MomentumTestFunction<T> + ?Sized>(
    measure: &SpectralMeasure<T>,
    f: &F,
    tol: &Tolerance<T>,
) -> Result<KernelValue<T>> {
    scaled_w(measure, f, T::one(), tol)
}

/// `W₊,λ(f) = λ⁻² ∫dρ(s) ∫d³p f̃(ω_λ, p)/ω_λ`, `ω_λ = sqrt(p² + λ² s)`.
pub fn scaled_w<T: Real, F: MomentumTestFunction<T> + ?Sized>(
    measure: &SpectralMeasure<T>,
    f: &F,
    lambda: T,
    tol: &Tolerance<T>,
) -> Result<KernelValue<T>> {
    require_scalar(measure)?;
    measure_pairing(measure, f, &scalar_kernel(), lambda, tol, "smeared two-point pairing")
}

fn metric<T: Real>(mu: usize) -> T {
    if mu == 0 {
        T::one()
    } else {
        -T::one()
    }
}

/// `(-p_μ² g_νν - p_ν² g_μμ) / (2 p⁰)` on the shell, metric `(+,-,-,-)`.
pub(crate) fn photon_kernel<T: Real>(mu: usize, nu: usize) -> Result<ShellKernel<impl Fn(T, [T; 3]) -> T>> {
    if mu > 3 || nu > 3 {
        return Err(Error::domain(format!("Lorentz indices must be in 0..=3, got ({mu}, {nu})")));
    }
    if mu == nu {
        return Err(Error::domain(format!(
            "photon kernel needs distinct indices, got ({mu}, {nu})"
        )));
    }
    let component = move |w: T, p: [T; 3], i: usize| if i == 0 { w } else { p[i - 1] };
    Ok(ShellKernel {
        factor: move |w: T, p: [T; 3]| {
            if w <= T::zero() {
                return T::zero();
            }
            let pm = component(w, p, mu);
            let pn = component(w, p, nu);
            (-pm * pm * metric::<T>(nu) - pn * pn * metric::<T>(mu)) / (T::lit(2.0) * w)
        },
        angular_degree: 2,
    })
}

/// Smeared photon field-strength two-point function for the index pair `(μ, ν)`.
pub fn photon_kernel_smeared<T: Real, F: MomentumTestFunction<T> + ?Sized>(
    measure: &SpectralMeasure<T>,
    mu: usize,
    nu: usize,
    f: &F,
    tol: &Tolerance<T>,
) -> Result<KernelValue<T>> {
    let kernel = photon_kernel::<T>(mu, nu)?;
    if measure.channel() != Channel::PhotonFieldStrength {
        return Err(Error::validation(format!(
            "photon kernel needs a photonFieldStrength measure, got {}",
            measure.channel()
        )));
    }
    measure_pairing(measure, f, &kernel, T::one(), tol, "photon kernel pairing")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{Atom, Density, Witness};
    use crate::scalar::rel_diff;

    fn atom(mass2: f64, weight: f64) -> SpectralMeasure<f64> {
        SpectralMeasure::free_scalar(mass2).unwrap().scaled(weight).unwrap()
    }

    fn tol() -> Tolerance<f64> {
        Tolerance::default()
    }

    #[test]
    fn massless_kernel_is_inverse_square() {
        let a = delta_plus_spacelike(0.0, 1.0).unwrap();
        let b = delta_plus_spacelike(0.0, 2.0).unwrap();
        assert_eq!(a / b, 4.0);
        assert!(delta_plus_spacelike(1.0, 0.0).is_err());
        assert!(delta_plus_spacelike(1.0, -1.0).is_err());
    }

    #[test]
    fn massive_kernel_decays() {
        let near = delta_plus_spacelike(1.0, 1.0).unwrap();
        let far = delta_plus_spacelike(1.0, 20.0).unwrap();
        assert!(far < (-15.0f64).exp() * near);
        // approaches the massless form at short distance
        let short = delta_plus_spacelike(1.0, 1e-4).unwrap();
        assert!(rel_diff(short, delta_plus_spacelike(0.0, 1e-4).unwrap()) < 1e-6);
    }

    #[test]
    fn sphere_rule_integrates_monomials() {
        let rule = SphereRule::<f64>::new(4);
        let integral = |g: &dyn Fn([f64; 3]) -> f64| {
            rule.directions
                .iter()
                .zip(&rule.weights)
                .map(|(n, w)| w * g(*n))
                .sum::<f64>()
        };
        let pi = std::f64::consts::PI;
        assert!((integral(&|_| 1.0) - 4.0 * pi).abs() < 1e-13);
        assert!((integral(&|n| n[0] * n[0]) - 4.0 * pi / 3.0).abs() < 1e-13);
        assert!((integral(&|n| n[2].powi(4)) - 4.0 * pi / 5.0).abs() < 1e-13);
        assert!((integral(&|n| n[0] * n[0] * n[1] * n[1]) - 4.0 * pi / 15.0).abs() < 1e-13);
        assert!(integral(&|n| n[0] * n[1]).abs() < 1e-13);
    }

    #[test]
    fn zero_measure_pairs_to_zero() {
        let f = TestFunction::isotropic(2.0, 1.0, 1.0).unwrap();
        let zero = SpectralMeasure::zero(Channel::Scalar);
        assert_eq!(smeared_w(&zero, &f, &tol()).unwrap().value, 0.0);
        let ph = SpectralMeasure::zero(Channel::PhotonFieldStrength);
        assert_eq!(photon_kernel_smeared(&ph, 1, 2, &f, &tol()).unwrap().value, 0.0);
    }

    #[test]
    fn isotropic_massless_closed_form() {
        // f̃ = exp(-(ω-a)²/2 - p²/2), s = 0: W = 4π ∫ p e^{-(p-a)²/2 - p²/2} dp.
        // With a = 0 this is 4π ∫ p e^{-p²} dp = 2π.
        let f = TestFunction::isotropic(0.0, 1.0, 1.0).unwrap();
        let w = smeared_w(&atom(0.0, 1.0), &f, &tol()).unwrap();
        assert!(rel_diff(w.value, 2.0 * std::f64::consts::PI) < 1e-9, "{w:?}");
    }

    #[test]
    fn unit_scale_matches_smeared() {
        let f = TestFunction::isotropic(2.0, 1.0, 1.0).unwrap();
        let m = atom(1.0, 1.0);
        let a = smeared_w(&m, &f, &tol()).unwrap().value;
        let b = scaled_w(&m, &f, 1.0, &tol()).unwrap().value;
        assert!(rel_diff(a, b) < 1e-12);
        assert!(scaled_w(&m, &f, 0.0, &tol()).is_err());
        assert!(scaled_w(&m, &f, 1.5, &tol()).is_err());
    }

    #[test]
    fn massless_atom_scales_exactly() {
        let f = TestFunction::isotropic(1.0, 0.5, 1.0).unwrap();
        let m = atom(0.0, 1.0);
        let base = smeared_w(&m, &f, &tol()).unwrap().value;
        for lam in [0.5, 0.125, 1e-3] {
            let v = scaled_w(&m, &f, lam, &tol()).unwrap().value;
            assert!(rel_diff(v * lam * lam, base) < 1e-12);
        }
    }

    #[test]
    fn general_structure_matches_isotropic_rule() {
        // A tiny spatial offset forces the 3-D nested path.
        let iso = TestFunction::isotropic(2.0, 1.0, 1.0).unwrap();
        let off = TestFunction::gaussian([2.0, 0.0, 0.0, 1e-9], [1.0, 1.0]).unwrap();
        assert_eq!(off.structure(), Structure::General);
        let m = atom(1.0, 1.0);
        let a = smeared_w(&m, &iso, &tol()).unwrap().value;
        let b = smeared_w(&m, &off, &tol()).unwrap().value;
        assert!(rel_diff(a, b) < 1e-7, "{a} vs {b}");
    }

    #[test]
    fn separable_polynomial_matches_general() {
        let sep = TestFunction::gaussian_times_polynomial([2.0, 0.0, 0.0, 0.0], [1.0, 1.0], [0, 2, 0, 0]).unwrap();
        assert_eq!(sep.structure(), Structure::Separable { angular_degree: 2 });
        let gen =
            TestFunction::gaussian_times_polynomial([2.0, 0.0, 0.0, 1e-9], [1.0, 1.0], [0, 2, 0, 0]).unwrap();
        let m = atom(1.0, 1.0);
        let a = smeared_w(&m, &sep, &tol()).unwrap().value;
        let b = smeared_w(&m, &gen, &tol()).unwrap().value;
        assert!(rel_diff(a, b) < 1e-7, "{a} vs {b}");
    }

    #[test]
    fn photon_kernel_symmetry_and_indices() {
        let f = TestFunction::isotropic(1.5, 1.0, 1.0).unwrap();
        let m = SpectralMeasure::free_scalar(0.0)
            .unwrap()
            .with_channel(Channel::PhotonFieldStrength);
        let a = photon_kernel_smeared(&m, 1, 2, &f, &tol()).unwrap().value;
        let b = photon_kernel_smeared(&m, 2, 1, &f, &tol()).unwrap().value;
        assert_eq!(a, b);
        assert!(a > 0.0);
        assert!(photon_kernel_smeared(&m, 1, 1, &f, &tol()).is_err());
        assert!(photon_kernel_smeared(&m, 0, 4, &f, &tol()).is_err());
        assert!(photon_kernel_smeared(&atom(0.0, 1.0), 1, 2, &f, &tol()).is_err());
        // For isotropic f̃ the (1,2) and (1,3) components coincide.
        let c = photon_kernel_smeared(&m, 1, 3, &f, &tol()).unwrap().value;
        assert!(rel_diff(a, c) < 1e-12);
    }

    #[test]
    fn kl_superposition_of_atom() {
        let m = SpectralMeasure::new(
            Channel::Scalar,
            vec![Atom::new(4.0, 0.5)],
            Density::Zero,
            None,
            Witness::new(1.0, 0.0),
        )
        .unwrap();
        let v = kl_spacelike(&m, 0.7, &tol()).unwrap().value;
        assert!(rel_diff(v, 0.5 * delta_plus_spacelike(2.0, 0.7).unwrap()) < 1e-15);
    }

    #[test]
    fn rejects_bad_test_functions() {
        assert!(TestFunction::isotropic(1.0, 0.0, 1.0).is_err());
        assert!(TestFunction::gaussian([f64::NAN, 0.0, 0.0, 0.0], [1.0, 1.0]).is_err());
        let doc = r#"{"family":"gaussian","center":[1,0,0,0],"widths":[1,1],"exponents":[1,0,0,0]}"#;
        assert!(serde_json::from_str::<TestFunction<f64>>(doc).is_err());
        let doc = r#"{"family":"gaussianTimesPolynomial","center":[1,0,0,0],"widths":[1,1],"exponents":[1,0,2,0]}"#;
        let f: TestFunction<f64> = serde_json::from_str(doc).unwrap();
        assert_eq!(f.exponents(), [1, 0, 2, 0]);
        let back: TestFunction<f64> = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
    }
}
