//! Scaled spacetime averages of static electromagnetic fields, the
//! asymptotic field functional, the charge it determines, and the vacuum
//! variance of the averaged field.
//!
//! Conventions: `F_{i0} = E^i`, `F_{0i} = -E^i`, `F_{ij} = 0` for a static
//! electric field, and `∂ⁱ = -∂_i`. With these, the charge functional
//! `Σ_i f_{i0}(∂ⁱχ)` returns `+q` for the Coulomb field of charge `q`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    measure_pairing, photon_kernel, KernelValue, MomentumTestFunction, SphereRule, Structure, SupportHint,
};
use crate::measures::{Channel, SpectralMeasure};
use crate::quad::{self, Tolerance};
use crate::scalar::Real;

/// Static field configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "camelCase", deny_unknown_fields)]
pub enum FieldConfiguration<T> {
    /// `E = q x̂ / (4π r²)`.
    Coulomb { q: T },
    /// Screened field `E = q (1 + m r) e^{-m r} x̂ / (4π r²)`.
    Yukawa { q: T, m: T },
    Null,
}

impl<T: Real> FieldConfiguration<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FieldConfiguration::Coulomb { q } if !q.is_finite() => {
                Err(Error::validation("coulomb: charge must be finite"))
            }
            FieldConfiguration::Yukawa { q, m } if !(q.is_finite() && m.is_finite() && m >= T::zero()) => Err(
                Error::validation("yukawa: charge must be finite and the screening mass finite and >= 0"),
            ),
            _ => Ok(()),
        }
    }

    /// Radial profile `g(r)` with `E = q g(r) x̂`.
    fn profile(&self, r: T) -> T {
        let four_pi = T::lit(4.0) * T::PI();
        match *self {
            FieldConfiguration::Coulomb { q } => q / (four_pi * r * r),
            FieldConfiguration::Yukawa { q, m } => {
                let mr = m * r;
                q * (T::one() + mr) * (-mr).exp() / (four_pi * r * r)
            }
            FieldConfiguration::Null => T::zero(),
        }
    }

    /// Electric field at `x ≠ 0`.
    pub fn electric(&self, x: [T; 3]) -> [T; 3] {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r == T::zero() {
            return [T::nan(); 3];
        }
        let g = self.profile(r) / r;
        [g * x[0], g * x[1], g * x[2]]
    }

    /// `F_{μν}(x)`; time-independent.
    pub fn component(&self, mu: usize, nu: usize, x: [T; 3]) -> T {
        match (mu, nu) {
            (i, 0) if (1..=3).contains(&i) => self.electric(x)[i - 1],
            (0, j) if (1..=3).contains(&j) => -self.electric(x)[j - 1],
            _ => T::zero(),
        }
    }
}

fn check_indices(mu: usize, nu: usize) -> Result<()> {
    if mu > 3 || nu > 3 {
        return Err(Error::domain(format!("Lorentz indices must be in 0..=3, got ({mu}, {nu})")));
    }
    Ok(())
}

/// `exp(-β / (1 - t²))` on `(-1, 1)`, zero outside.
pub fn bump<T: Real>(t: T, beta: T) -> T {
    let d = T::one() - t * t;
    if d <= T::zero() {
        T::zero()
    } else {
        (-beta / d).exp()
    }
}

/// `∫_{-1}^{1} bump(t) cos(k t) dt`.
pub fn bump_fourier<T: Real>(k: T, beta: T) -> T {
    let tol = Tolerance::new(T::lit(1e-12).max(T::epsilon() * T::lit(64.0)), T::min_positive_value());
    // Even integrand: twice the half range.
    let pts = [0.0, 0.5, 1.0].map(T::lit);
    T::lit(2.0) * quad::integrate_pieces(|t| bump(t, beta) * (k * t).cos(), &pts, &tol).value
}

/// `∫_{-1}^{1} bump(t) dt`.
pub fn bump_integral<T: Real>(beta: T) -> T {
    bump_fourier(T::zero(), beta)
}

/// Smooth step from 0 at `u <= 0` to 1 at `u >= 1`.
fn smooth_step<T: Real>(u: T) -> T {
    if u <= T::zero() {
        return T::zero();
    }
    if u >= T::one() {
        return T::one();
    }
    let h = |x: T| (-T::one() / x).exp();
    let a = h(u);
    a / (a + h(T::one() - u))
}

fn smooth_step_derivative<T: Real>(u: T) -> T {
    if u <= T::zero() || u >= T::one() {
        return T::zero();
    }
    let v = T::one() - u;
    let (a, b) = ((-T::one() / u).exp(), (-T::one() / v).exp());
    let s = a + b;
    if s == T::zero() {
        return T::zero();
    }
    (a / (u * u) * b + a * b / (v * v)) / (s * s)
}

/// Angular factor of a probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum Angular<T> {
    Monopole,
    /// `axis · ŷ`.
    Dipole { axis: [T; 3] },
}

impl<T: Real> Angular<T> {
    fn eval(&self, n: [T; 3]) -> T {
        match self {
            Angular::Monopole => T::one(),
            Angular::Dipole { axis } => axis[0] * n[0] + axis[1] * n[1] + axis[2] * n[2],
        }
    }

    fn degree(&self) -> u32 {
        match self {
            Angular::Monopole => 0,
            Angular::Dipole { .. } => 1,
        }
    }
}

fn default_beta<T: Real>() -> T {
    T::one()
}

fn default_angular<T: Real>() -> Angular<T> {
    Angular::Monopole
}

/// `φ(y) = bump(y⁰/τ) · bump((2|y| - r₁ - r₂)/(r₂ - r₁)) · A(ŷ)`, supported
/// in `|y⁰| < τ < r₁ <= |y| <= r₂`, hence at spacelike points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct ProbeFunction<T> {
    pub r1: T,
    pub r2: T,
    pub tau: T,
    #[serde(default = "default_beta")]
    pub beta: T,
    #[serde(default = "default_angular")]
    pub angular: Angular<T>,
}

impl<T: Real> ProbeFunction<T> {
    pub fn new(r1: T, r2: T, tau: T, angular: Angular<T>) -> Result<Self> {
        let p = ProbeFunction {
            r1,
            r2,
            tau,
            beta: T::one(),
            angular,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.r1, self.r2, self.tau, self.beta].iter().all(|x| x.is_finite());
        if !(all_finite && self.tau > T::zero() && self.tau < self.r1 && self.r1 < self.r2) {
            return Err(Error::validation(
                "probe: need 0 < tau < r1 < r2 (support in the spacelike complement of the origin)",
            ));
        }
        if self.beta <= T::zero() {
            return Err(Error::validation("probe: bump parameter beta must be > 0"));
        }
        if let Angular::Dipole { axis } = self.angular {
            if axis.iter().any(|a| !a.is_finite()) {
                return Err(Error::validation("probe: dipole axis must be finite"));
            }
        }
        Ok(())
    }

    fn radial(&self, rho: T) -> T {
        let u = (T::lit(2.0) * rho - self.r1 - self.r2) / (self.r2 - self.r1);
        bump(u, self.beta)
    }

    /// Pointwise value `φ(y⁰, y)`.
    pub fn eval(&self, y0: T, y: [T; 3]) -> T {
        let rho = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        if rho == T::zero() {
            return T::zero();
        }
        let n = [y[0] / rho, y[1] / rho, y[2] / rho];
        bump(y0 / self.tau, self.beta) * self.radial(rho) * self.angular.eval(n)
    }
}

/// A test function `ψ(y⁰) S(y)` whose spatial part has compact radial support,
/// paired against static fields.
pub trait SpacetimeProbe<T: Real>: Sync {
    /// `ψ(t)`, supported in `|t| < time_support()`.
    fn time_profile(&self, t: T) -> T;
    fn time_support(&self) -> T;
    /// `∫ψ(t) dt`, from a closed form or a quadrature in natural units.
    fn time_integral(&self) -> T;
    fn spatial(&self, y: [T; 3]) -> T;
    fn radial_window(&self) -> (T, T);
    /// Polynomial degree of `spatial` in `ŷ` at fixed `|y|`.
    fn angular_degree(&self) -> u32;
}

impl<T: Real> SpacetimeProbe<T> for ProbeFunction<T> {
    fn time_profile(&self, t: T) -> T {
        bump(t / self.tau, self.beta)
    }

    fn time_support(&self) -> T {
        self.tau
    }

    fn time_integral(&self) -> T {
        self.tau * bump_integral(self.beta)
    }

    fn spatial(&self, y: [T; 3]) -> T {
        let rho = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        if rho == T::zero() {
            return T::zero();
        }
        self.radial(rho) * self.angular.eval([y[0] / rho, y[1] / rho, y[2] / rho])
    }

    fn radial_window(&self) -> (T, T) {
        (self.r1, self.r2)
    }

    fn angular_degree(&self) -> u32 {
        self.angular.degree()
    }
}

/// `χ(x) = χ_t(x⁰) χ_s(|x|)` with `∫χ_t = 1`, `χ_s = 1` below `c₁` and
/// `0` above `c₂`; `∂ⁱχ` is supported at spacelike points when `τ < c₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct ChargeFunction<T> {
    pub c1: T,
    pub c2: T,
    pub tau: T,
    #[serde(default = "default_beta")]
    pub beta: T,
}

impl<T: Real> ChargeFunction<T> {
    pub fn new(c1: T, c2: T, tau: T) -> Result<Self> {
        let c = ChargeFunction {
            c1,
            c2,
            tau,
            beta: T::one(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.c1, self.c2, self.tau, self.beta].iter().all(|x| x.is_finite());
        if !(all_finite && self.tau > T::zero() && self.tau < self.c1 && self.c1 < self.c2 && self.beta > T::zero())
        {
            return Err(Error::validation(
                "charge function: need 0 < tau < c1 < c2 and beta > 0",
            ));
        }
        Ok(())
    }

    pub fn time_factor(&self, t: T) -> T {
        bump(t / self.tau, self.beta) / (self.tau * bump_integral(self.beta))
    }

    pub fn spatial_factor(&self, rho: T) -> T {
        T::one() - smooth_step((rho - self.c1) / (self.c2 - self.c1))
    }

    /// `dχ_s/dρ`.
    pub fn spatial_derivative(&self, rho: T) -> T {
        let w = self.c2 - self.c1;
        -smooth_step_derivative((rho - self.c1) / w) / w
    }

    /// `χ(x⁰, x)`.
    pub fn eval(&self, x0: T, x: [T; 3]) -> T {
        let rho = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        self.time_factor(x0) * self.spatial_factor(rho)
    }

    /// The probe `∂ⁱχ = -∂χ/∂xⁱ` for spatial index `i ∈ {1, 2, 3}`.
    pub fn derivative_probe(&self, i: usize) -> Result<ChargeDerivative<T>> {
        if !(1..=3).contains(&i) {
            return Err(Error::domain(format!("spatial index must be 1, 2 or 3, got {i}")));
        }
        Ok(ChargeDerivative {
            chi: *self,
            index: i,
            norm: bump_integral(self.beta),
        })
    }
}

/// `∂ⁱχ` for one spatial index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeDerivative<T> {
    chi: ChargeFunction<T>,
    index: usize,
    norm: T,
}

impl<T: Real> SpacetimeProbe<T> for ChargeDerivative<T> {
    fn time_profile(&self, t: T) -> T {
        bump(t / self.chi.tau, self.chi.beta) / (self.chi.tau * self.norm)
    }

    fn time_support(&self) -> T {
        self.chi.tau
    }

    fn time_integral(&self) -> T {
        T::one()
    }

    fn spatial(&self, y: [T; 3]) -> T {
        let rho = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        if rho == T::zero() {
            return T::zero();
        }
        -self.chi.spatial_derivative(rho) * y[self.index - 1] / rho
    }

    fn radial_window(&self) -> (T, T) {
        (self.chi.c1, self.chi.c2)
    }

    fn angular_degree(&self) -> u32 {
        1
    }
}

fn spatial_pairing<T: Real, P: SpacetimeProbe<T> + ?Sized>(
    config: &FieldConfiguration<T>,
    probe: &P,
    mu: usize,
    nu: usize,
    lo: T,
    hi: T,
    weight: impl Fn(T) -> T,
    at: impl Fn(T) -> T,
    tol: &Tolerance<T>,
) -> Result<T> {
    // Fields are radial profile times ŷ, one degree in ŷ.
    let rule = SphereRule::<T>::new(probe.angular_degree() + 1);
    let integrand = |rho: T| {
        let mut acc = T::zero();
        for (n, w) in rule.directions.iter().zip(&rule.weights) {
            let y = [rho * n[0], rho * n[1], rho * n[2]];
            let x = at(rho);
            let xf = [x * n[0], x * n[1], x * n[2]];
            acc += *w * probe.spatial(y) * config.component(mu, nu, xf);
        }
        weight(rho) * acc
    };
    let mid = T::lit(0.5) * (lo + hi);
    let est = quad::integrate_pieces(integrand, &[lo, mid, hi], tol).into_result("spatial average of the field")?;
    Ok(est.value)
}

/// `F_{μν}(φ_R) = R² ∫d⁴y φ(y) F_{μν}(R y)` for a static configuration.
pub fn average_field<T: Real, P: SpacetimeProbe<T> + ?Sized>(
    config: &FieldConfiguration<T>,
    probe: &P,
    (mu, nu): (usize, usize),
    r: T,
    tol: &Tolerance<T>,
) -> Result<T> {
    check_indices(mu, nu)?;
    config.validate()?;
    if !(r.is_finite() && r > T::zero()) {
        return Err(Error::domain(format!("scale R must be finite and > 0, got {r}")));
    }
    if mu == nu || matches!(config, FieldConfiguration::Null) {
        return Ok(T::zero());
    }
    let (lo, hi) = probe.radial_window();
    let spatial = spatial_pairing(config, probe, mu, nu, lo, hi, |rho| rho * rho, |rho| r * rho, tol)?;
    Ok(r * r * probe.time_integral() * spatial)
}

/// Same functional evaluated directly in `x`: `∫d⁴x φ(x/R) F_{μν}(x) / R²`.
pub fn average_field_direct<T: Real, P: SpacetimeProbe<T> + ?Sized>(
    config: &FieldConfiguration<T>,
    probe: &P,
    (mu, nu): (usize, usize),
    r: T,
    tol: &Tolerance<T>,
) -> Result<T> {
    check_indices(mu, nu)?;
    config.validate()?;
    if !(r.is_finite() && r > T::zero()) {
        return Err(Error::domain(format!("scale R must be finite and > 0, got {r}")));
    }
    if mu == nu || matches!(config, FieldConfiguration::Null) {
        return Ok(T::zero());
    }
    let ts = probe.time_support() * r;
    let time = quad::integrate_pieces(|t| probe.time_profile(t / r), &[-ts, T::zero(), ts], tol)
        .into_result("time average of the probe")?
        .value;
    let (lo, hi) = probe.radial_window();
    // Probe spatial factor evaluated at x/R: integrate over |x| = R ρ.
    let rule = SphereRule::<T>::new(probe.angular_degree() + 1);
    let integrand = |x: T| {
        let mut acc = T::zero();
        for (n, w) in rule.directions.iter().zip(&rule.weights) {
            let y = [x / r * n[0], x / r * n[1], x / r * n[2]];
            acc += *w * probe.spatial(y) * config.component(mu, nu, [x * n[0], x * n[1], x * n[2]]);
        }
        x * x * acc
    };
    let (a, b) = (lo * r, hi * r);
    let mid = T::lit(0.5) * (a + b);
    let spatial = quad::integrate_pieces(integrand, &[a, mid, b], tol)
        .into_result("spatial average of the field")?
        .value;
    Ok(time * spatial / (r * r))
}

/// Stopping rule for R-extrapolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitOptions<T> {
    pub rel: T,
    pub abs: T,
    pub tol: Tolerance<T>,
}

impl<T: Real> Default for LimitOptions<T> {
    fn default() -> Self {
        LimitOptions {
            rel: T::lit(1e-4),
            abs: T::lit(1e-7).max(T::epsilon() * T::lit(64.0)),
            tol: Tolerance::new(T::default_rel_tol(), T::lit(1e-15).max(T::min_positive_value())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", bound(serialize = "T: Real + Serialize"))]
pub struct LimitEstimate<T: Real> {
    pub value: T,
    /// Estimated distance of `value` from the limit.
    pub uncertainty: T,
    pub converged: bool,
    pub extrapolated: bool,
    pub rgrid: Vec<T>,
    pub sequence: Vec<T>,
}

fn check_rgrid<T: Real>(rgrid: &[T]) -> Result<()> {
    if rgrid.len() < 3 {
        return Err(Error::validation("R grid needs at least 3 points"));
    }
    if rgrid.iter().any(|r| !(r.is_finite() && *r > T::zero())) || rgrid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("R grid must be positive and strictly increasing"));
    }
    if rgrid[rgrid.len() - 1] < T::lit(10.0) * rgrid[0] {
        return Err(Error::validation("R grid must span at least one decade"));
    }
    Ok(())
}

fn aitken<T: Real>(a: T, b: T, c: T) -> Option<(T, T)> {
    let (d1, d2) = (b - a, c - b);
    let denom = d2 - d1;
    if d1 == T::zero() || denom == T::zero() {
        return None;
    }
    let ratio = d2 / d1;
    if !(ratio.abs() < T::lit(0.9)) {
        return None;
    }
    Some((c - d2 * d2 / denom, ratio))
}

/// Extrapolates a sequence in `R` toward `R → ∞`.
///
/// The last value is kept unless Aitken's Δ² from the last two triples is
/// more stable than the last difference.
pub fn extrapolate<T: Real>(rgrid: &[T], sequence: &[T], opts: &LimitOptions<T>) -> LimitEstimate<T> {
    let n = sequence.len();
    let last = sequence[n - 1];
    let mut value = last;
    let mut uncertainty = (last - sequence[n - 2]).abs();
    let mut extrapolated = false;
    if n >= 4 {
        if let (Some((a1, _)), Some((a0, _))) = (
            aitken(sequence[n - 3], sequence[n - 2], sequence[n - 1]),
            aitken(sequence[n - 4], sequence[n - 3], sequence[n - 2]),
        ) {
            let spread = (a1 - a0).abs();
            if spread < uncertainty {
                value = a1;
                uncertainty = spread;
                extrapolated = true;
            }
        }
    }
    let converged = uncertainty.is_finite() && uncertainty <= opts.rel * value.abs() + opts.abs;
    LimitEstimate {
        value,
        uncertainty,
        converged,
        extrapolated,
        rgrid: rgrid.to_vec(),
        sequence: sequence.to_vec(),
    }
}

/// Averages over every `R` of the grid, in grid order.
pub fn average_sweep<T: Real, P: SpacetimeProbe<T> + ?Sized>(
    config: &FieldConfiguration<T>,
    probe: &P,
    mu_nu: (usize, usize),
    rgrid: &[T],
    tol: &Tolerance<T>,
) -> Result<Vec<T>> {
    rgrid
        .iter()
        .map(|&r| average_field(config, probe, mu_nu, r, tol))
        .collect()
}

/// `f_{μν}(φ) = lim_{R→∞} F_{μν}(φ_R)` from a sweep over `rgrid`.
pub fn limit_functional<T: Real, P: SpacetimeProbe<T> + ?Sized>(
    config: &FieldConfiguration<T>,
    probe: &P,
    mu_nu: (usize, usize),
    rgrid: &[T],
    opts: &LimitOptions<T>,
) -> Result<LimitEstimate<T>> {
    check_rgrid(rgrid)?;
    let seq = average_sweep(config, probe, mu_nu, rgrid, &opts.tol)?;
    Ok(extrapolate(rgrid, &seq, opts))
}

/// Charge extraction result with the per-component limits.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", bound(serialize = "T: Real + Serialize"))]
pub struct ChargeEstimate<T: Real> {
    pub charge: T,
    pub uncertainty: T,
    pub components: Vec<LimitEstimate<T>>,
}

/// `⟨Q⟩ = Σ_i f_{i0}(∂ⁱχ)`.
pub fn extract_charge<T: Real>(
    config: &FieldConfiguration<T>,
    chi: &ChargeFunction<T>,
    rgrid: &[T],
    opts: &LimitOptions<T>,
) -> Result<ChargeEstimate<T>> {
    chi.validate()?;
    let mut components = Vec::with_capacity(3);
    for i in 1..=3 {
        let probe = chi.derivative_probe(i)?;
        components.push(limit_functional(config, &probe, (i, 0), rgrid, opts)?);
    }
    if let Some(bad) = components.iter().position(|c| !c.converged) {
        return Err(Error::NotConverged {
            context: format!("charge component f_{}0", bad + 1),
            values: components[bad].sequence.iter().map(|v| v.as_f64()).collect(),
        });
    }
    Ok(ChargeEstimate {
        charge: components.iter().map(|c| c.value).sum(),
        uncertainty: components.iter().map(|c| c.uncertainty).sum(),
        components,
    })
}

/// `|φ̃_R(p)|² = R⁴ |φ̃(R p)|²` for a probe, as a momentum-space function.
#[derive(Debug, Clone)]
pub struct ScaledProbeSpectrum<T> {
    probe: ProbeFunction<T>,
    r: T,
    nodes: Vec<T>,
    weights: Vec<T>,
}

// |bump transform|² at k h = 120 is about e^{-2√240} ≈ 3e-14 of its peak.
const TRANSFORM_REACH: f64 = 120.0;
const PANEL_NODES: usize = 16;

impl<T: Real> ScaledProbeSpectrum<T> {
    pub fn new(probe: ProbeFunction<T>, r: T) -> Result<Self> {
        probe.validate()?;
        if !(r.is_finite() && r > T::zero()) {
            return Err(Error::domain(format!("scale R must be finite and > 0, got {r}")));
        }
        let (nodes, weights) = quad::gauss_legendre(PANEL_NODES);
        Ok(ScaledProbeSpectrum {
            probe,
            r,
            nodes,
            weights,
        })
    }

    // Composite Gauss–Legendre with about one panel per half period of
    // cos(k x); the bump vanishes to all orders at the panel ends.
    fn oscillatory<F: Fn(T) -> T>(&self, f: F, a: T, b: T, k: T) -> T {
        let half_periods = (k.abs() * (b - a) / T::PI()).ceil().to_usize().unwrap_or(1);
        let panels = half_periods.max(4);
        quad::composite_gauss_legendre(f, a, b, panels, &self.nodes, &self.weights)
    }

    /// `∫ b(t/τ) e^{i k t} dt` (real: the profile is even).
    fn time_transform(&self, k: T) -> T {
        let (tau, beta) = (self.probe.tau, self.probe.beta);
        let kt = k * tau;
        T::lit(2.0) * tau * self.oscillatory(|u| bump(u, beta) * (kt * u).cos(), T::zero(), T::one(), kt)
    }

    /// `∫ρ² b_r(ρ) j_l(kρ) dρ` with `l` the angular degree.
    fn radial_transform(&self, k: T) -> T {
        let p = &self.probe;
        let l = p.angular.degree();
        self.oscillatory(|rho| rho * rho * p.radial(rho) * spherical_bessel(l, k * rho), p.r1, p.r2, k)
    }

    fn width(&self) -> T {
        self.probe.tau.min(T::lit(0.5) * (self.probe.r2 - self.probe.r1))
    }
}

/// `j₀` and `j₁`.
fn spherical_bessel<T: Real>(l: u32, x: T) -> T {
    let x2 = x * x;
    match l {
        0 => {
            if x.abs() < T::lit(1e-3) {
                T::one() - x2 / T::lit(6.0) + x2 * x2 / T::lit(120.0)
            } else {
                x.sin() / x
            }
        }
        _ => {
            if x.abs() < T::lit(1e-2) {
                x / T::lit(3.0) - x * x2 / T::lit(30.0) + x * x2 * x2 / T::lit(840.0)
            } else {
                x.sin() / x2 - x.cos() / x
            }
        }
    }
}

impl<T: Real> MomentumTestFunction<T> for ScaledProbeSpectrum<T> {
    fn eval(&self, p0: T, p: [T; 3]) -> T {
        let pn = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if pn == T::zero() {
            return self.radial_factor(p0, pn) * self.angular_factor([T::zero(), T::zero(), T::one()]);
        }
        self.radial_factor(p0, pn) * self.angular_factor([p[0] / pn, p[1] / pn, p[2] / pn])
    }

    fn radial_factor(&self, p0: T, p_norm: T) -> T {
        let r = self.r;
        let t = self.time_transform(r * p0);
        if t == T::zero() {
            return T::zero();
        }
        let s = T::lit(4.0) * T::PI() * self.radial_transform(r * p_norm);
        let r2 = r * r;
        r2 * r2 * t * t * s * s
    }

    /// `(axis · n̂)²` for dipoles: the spatial transform is `-4πi (axis · p̂) ∫ρ² b j₁`.
    fn angular_factor(&self, n: [T; 3]) -> T {
        match self.probe.angular {
            Angular::Monopole => T::one(),
            Angular::Dipole { axis } => {
                let c = axis[0] * n[0] + axis[1] * n[1] + axis[2] * n[2];
                c * c
            }
        }
    }

    fn structure(&self) -> Structure {
        match self.probe.angular {
            Angular::Monopole => Structure::Isotropic,
            Angular::Dipole { .. } => Structure::Separable { angular_degree: 2 },
        }
    }

    fn support(&self) -> SupportHint<T> {
        let unit = T::one() / (self.r * self.width());
        let q = T::lit(TRANSFORM_REACH) * unit;
        let breaks: Vec<T> = [1.0, 3.0, 10.0, 30.0].iter().map(|&k| T::lit(k) * unit).collect();
        SupportHint {
            omega_range: (-q, q),
            radius: q,
            omega_breaks: breaks.clone(),
            radial_breaks: breaks,
        }
    }
}

/// `‖F_{μν}(φ_R) Ω‖²` for each `R`, from the photon field-strength measure.
pub fn vacuum_variance<T: Real>(
    measure: &SpectralMeasure<T>,
    probe: &ProbeFunction<T>,
    (mu, nu): (usize, usize),
    rgrid: &[T],
    tol: &Tolerance<T>,
) -> Result<Vec<KernelValue<T>>> {
    probe.validate()?;
    if measure.channel() != Channel::PhotonFieldStrength {
        return Err(Error::validation(format!(
            "vacuum variance needs a photonFieldStrength measure, got {}",
            measure.channel()
        )));
    }
    let kernel = photon_kernel::<T>(mu, nu)?;
    if rgrid.is_empty() || rgrid.iter().any(|r| !(r.is_finite() && *r > T::zero())) {
        return Err(Error::validation("R grid must be nonempty with positive entries"));
    }
    rgrid
        .iter()
        .map(|&r| {
            let spectrum = ScaledProbeSpectrum::new(*probe, r)?;
            measure_pairing(measure, &spectrum, &kernel, T::one(), tol, "vacuum variance pairing")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rel_diff;

    fn dipole(axis: [f64; 3]) -> ProbeFunction<f64> {
        ProbeFunction::new(1.0, 2.0, 0.5, Angular::Dipole { axis }).unwrap()
    }

    #[test]
    fn bump_normalization() {
        let nb = bump_integral(1.0f64);
        assert!((nb - 0.443_993_816_168_079_4).abs() < 1e-12, "{nb}");
        let chi = ChargeFunction::new(1.0, 2.0, 0.5).unwrap();
        let total: f64 = quad::integrate(|t| chi.time_factor(t), -0.5, 0.5, &Tolerance::default()).value;
        assert!((total - 1.0).abs() < 1e-10);
        assert_eq!(chi.spatial_factor(0.0), 1.0);
        assert_eq!(chi.spatial_factor(2.5), 0.0);
    }

    #[test]
    fn smooth_step_derivative_matches_difference() {
        for u in [0.1f64, 0.3, 0.5, 0.8, 0.95] {
            let h = 1e-6;
            let d = (smooth_step(u + h) - smooth_step(u - h)) / (2.0 * h);
            assert!((d - smooth_step_derivative(u)).abs() < 1e-7);
        }
    }

    #[test]
    fn coulomb_field_components() {
        let c = FieldConfiguration::Coulomb { q: 2.0 };
        let e = c.electric([0.0, 0.0, 2.0]);
        assert!((e[2] - 2.0 / (16.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert_eq!(c.component(3, 0, [0.0, 0.0, 2.0]), e[2]);
        assert_eq!(c.component(0, 3, [0.0, 0.0, 2.0]), -e[2]);
        assert_eq!(c.component(1, 2, [0.0, 0.0, 2.0]), 0.0);
    }

    #[test]
    fn probe_support_is_spacelike() {
        assert!(ProbeFunction::new(1.0, 2.0, 1.0, Angular::<f64>::Monopole).is_err());
        assert!(ProbeFunction::new(2.0, 1.0, 0.5, Angular::<f64>::Monopole).is_err());
        assert!(ChargeFunction::new(1.0, 2.0, 1.5f64).is_err());
        let p = dipole([0.0, 0.0, 1.0]);
        assert_eq!(p.eval(0.6, [0.0, 0.0, 1.5]), 0.0);
        assert_eq!(p.eval(0.0, [0.0, 0.0, 2.5]), 0.0);
        assert!(p.eval(0.0, [0.0, 0.0, 1.5]) > 0.0);
    }

    #[test]
    fn coulomb_average_is_scale_free() {
        let c = FieldConfiguration::Coulomb { q: 1.0 };
        let p = dipole([0.0, 0.0, 1.0]);
        let tol = Tolerance::default();
        let base = average_field(&c, &p, (3, 0), 1.0, &tol).unwrap();
        for r in [2.0, 4.0, 7.5] {
            let v = average_field(&c, &p, (3, 0), r, &tol).unwrap();
            assert!(rel_diff(v, base) < 1e-12);
            let d = average_field_direct(&c, &p, (3, 0), r, &tol).unwrap();
            assert!(rel_diff(d, v) < 1e-8, "{d} vs {v}");
        }
        let anti = average_field(&c, &p, (0, 3), 2.0, &tol).unwrap();
        assert!(rel_diff(anti, -base) < 1e-15);
        // Monopole probes see no net field component.
        let mono = ProbeFunction::new(1.0, 2.0, 0.5, Angular::Monopole).unwrap();
        assert!(average_field(&c, &mono, (3, 0), 1.0, &tol).unwrap().abs() < 1e-15);
    }

    #[test]
    fn coulomb_charge_and_sign() {
        let chi = ChargeFunction::new(1.0, 2.0, 0.5).unwrap();
        let grid: Vec<f64> = (1..=10).map(|k| 2.0 * k as f64).collect();
        let opts = LimitOptions::default();
        let q = extract_charge(&FieldConfiguration::Coulomb { q: 1.0 }, &chi, &grid, &opts).unwrap();
        assert!((q.charge - 1.0).abs() < 1e-8, "{q:?}");
        let q = extract_charge(&FieldConfiguration::Coulomb { q: -2.0 }, &chi, &grid, &opts).unwrap();
        assert!((q.charge + 2.0).abs() < 1e-8);
    }

    #[test]
    fn screened_charge_vanishes() {
        let chi = ChargeFunction::new(1.0, 2.0, 0.5).unwrap();
        let grid: Vec<f64> = (1..=10).map(|k| 2.0 * k as f64).collect();
        let q = extract_charge(&FieldConfiguration::Yukawa { q: 1.0, m: 1.0 }, &chi, &grid, &LimitOptions::default())
            .unwrap();
        assert!(q.charge.abs() < 1e-6, "{q:?}");
    }

    #[test]
    fn yukawa_average_decays() {
        let c = FieldConfiguration::Yukawa { q: 1.0, m: 1.0 };
        let p = dipole([1.0, 0.0, 0.0]);
        let tol = Tolerance::default();
        let a5 = average_field(&c, &p, (1, 0), 5.0, &tol).unwrap();
        let a10 = average_field(&c, &p, (1, 0), 10.0, &tol).unwrap();
        assert!(a10 / a5 < (-3.0f64).exp());
    }

    #[test]
    fn null_configuration() {
        let p = dipole([1.0, 0.0, 0.0]);
        let grid = [1.0, 3.0, 10.0];
        let l = limit_functional(&FieldConfiguration::Null, &p, (1, 0), &grid, &LimitOptions::default()).unwrap();
        assert_eq!((l.value, l.converged), (0.0, true));
    }

    #[test]
    fn rgrid_preconditions() {
        let p = dipole([1.0, 0.0, 0.0]);
        let c = FieldConfiguration::Coulomb { q: 1.0 };
        let opts = LimitOptions::default();
        assert!(limit_functional(&c, &p, (1, 0), &[1.0, 2.0, 5.0], &opts).is_err());
        assert!(limit_functional(&c, &p, (1, 0), &[1.0, 20.0], &opts).is_err());
        assert!(limit_functional(&c, &p, (1, 0), &[1.0, 5.0, 3.0, 20.0], &opts).is_err());
    }

    #[test]
    fn aitken_recovers_geometric_limit() {
        let grid: Vec<f64> = (1..=6).map(|k| k as f64 * 2.0).collect();
        let seq: Vec<f64> = grid.iter().map(|r| 3.0 + 0.5f64.powf(*r)).collect();
        let l = extrapolate(&grid, &seq, &LimitOptions::default());
        assert!(l.extrapolated);
        assert!((l.value - 3.0).abs() < 1e-12);
        assert!(l.converged);
    }

    #[test]
    fn spherical_bessel_branches_agree() {
        for l in [0, 1] {
            let (x, h) = (if l == 0 { 1e-3 } else { 1e-2 }, 1e-12);
            let below = spherical_bessel::<f64>(l, x - h);
            let above = spherical_bessel::<f64>(l, x + h);
            assert!((below - above).abs() < 1e-11);
        }
        assert!((spherical_bessel(1, 2.0f64) - 0.43539777497999166).abs() < 1e-14);
    }

    #[test]
    fn vacuum_variance_massless_is_scale_free() {
        let photon = SpectralMeasure::free_scalar(0.0)
            .unwrap()
            .with_channel(Channel::PhotonFieldStrength);
        let p = dipole([0.0, 0.0, 1.0]);
        let grid = [1.0, 2.0, 4.0, 8.0];
        let v = vacuum_variance(&photon, &p, (1, 2), &grid, &Tolerance::default()).unwrap();
        assert!(v[0].value > 0.0);
        for kv in &v[1..] {
            assert!(rel_diff(kv.value, v[0].value) < 1e-6, "{v:?}");
        }
    }

    #[test]
    fn vacuum_variance_massive_decays() {
        let photon = SpectralMeasure::free_scalar(1.0)
            .unwrap()
            .with_channel(Channel::PhotonFieldStrength);
        let p = ProbeFunction::new(1.0, 2.0, 0.5, Angular::Monopole).unwrap();
        let grid = [4.0, 16.0, 32.0, 64.0, 128.0];
        let v = vacuum_variance(&photon, &p, (3, 0), &grid, &Tolerance::default()).unwrap();
        // independent scipy evaluation of the same radial integral
        let expected: [f64; 5] = [
            17.663264276929066,
            0.2795752086937872,
            0.0014672816119894578,
            0.0014102374543141004,
            2.1477562840247593e-07,
        ];
        for (kv, e) in v.iter().zip(expected) {
            assert!((kv.value - e).abs() <= 1e-5 * e, "{} vs {e}", kv.value);
        }
        assert!(v[4].value < 1e-5 * v[1].value);
        let zero = SpectralMeasure::zero(Channel::PhotonFieldStrength);
        let v = vacuum_variance(&zero, &p, (3, 0), &grid, &Tolerance::default()).unwrap();
        assert!(v.iter().all(|kv| kv.value == 0.0));
    }
}
