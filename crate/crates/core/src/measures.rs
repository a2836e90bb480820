//! Positive, polynomially bounded spectral measures on squared mass.
//!
//! A measure is a finite set of atoms plus one absolutely continuous
//! density family, optionally truncated at an upper cutoff. Singular
//! continuous parts are not representable.

use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};
use crate::scalar::Real;

/// Default absolute tolerance (squared-mass units) when matching an atom
/// location against a target mass.
pub const DEFAULT_ATOM_MATCH: f64 = 1e-9;

/// Which two-point representation a measure feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Channel {
    Scalar,
    PhotonFieldStrength,
    FermionVector,
    FermionScalar,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Channel::Scalar => "scalar",
            Channel::PhotonFieldStrength => "photonFieldStrength",
            Channel::FermionVector => "fermionVector",
            Channel::FermionScalar => "fermionScalar",
        };
        f.write_str(name)
    }
}

/// A point mass `weight * δ(s - mass2)`. Serialized as `[mass2, weight]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
pub struct Atom<T: Copy> {
    pub mass2: T,
    pub weight: T,
}

impl<T: Copy> Atom<T> {
    pub fn new(mass2: T, weight: T) -> Self {
        Atom { mass2, weight }
    }
}

impl<T: Copy> From<[T; 2]> for Atom<T> {
    fn from([mass2, weight]: [T; 2]) -> Self {
        Atom { mass2, weight }
    }
}

impl<T: Copy> From<Atom<T>> for [T; 2] {
    fn from(a: Atom<T>) -> Self {
        [a.mass2, a.weight]
    }
}

/// Constants `(C, N)` asserting `∫_0^L dρ <= C (1 + L^N)`. Serialized as `[C, N]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
pub struct Witness<T: Copy> {
    pub constant: T,
    pub power: T,
}

impl<T: Copy> Witness<T> {
    pub fn new(constant: T, power: T) -> Self {
        Witness { constant, power }
    }
}

impl<T: Copy> From<[T; 2]> for Witness<T> {
    fn from([constant, power]: [T; 2]) -> Self {
        Witness { constant, power }
    }
}

impl<T: Copy> From<Witness<T>> for [T; 2] {
    fn from(w: Witness<T>) -> Self {
        [w.constant, w.power]
    }
}

/// Absolutely continuous part of a measure. Every family vanishes below
/// its `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "camelCase")]
pub enum Density<T> {
    Zero,
    /// `value` on `[threshold, ∞)`.
    #[serde(rename_all = "camelCase")]
    Constant {
        value: T,
        #[serde(default)]
        threshold: T,
    },
    /// `coefficient * s^exponent` on `[threshold, ∞)`.
    #[serde(rename_all = "camelCase")]
    PowerLaw {
        coefficient: T,
        exponent: T,
        #[serde(default)]
        threshold: T,
    },
    /// `coefficient * (width/π) / ((s - center)² + width²)` on `[threshold, ∞)`.
    #[serde(rename_all = "camelCase")]
    LorentzianResonance {
        coefficient: T,
        center: T,
        width: T,
        #[serde(default)]
        threshold: T,
    },
    /// Piecewise linear through `[s, value]` nodes, zero below the first
    /// node and held at the last value beyond the final node.
    Tabulated { grid: Vec<[T; 2]> },
}

impl<T: Real> Density<T> {
    pub fn constant(value: T) -> Self {
        Density::Constant {
            value,
            threshold: T::zero(),
        }
    }

    pub fn power_law(coefficient: T, exponent: T, threshold: T) -> Self {
        Density::PowerLaw {
            coefficient,
            exponent,
            threshold,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Density::Zero => "zero",
            Density::Constant { .. } => "constant",
            Density::PowerLaw { .. } => "powerLaw",
            Density::LorentzianResonance { .. } => "lorentzianResonance",
            Density::Tabulated { .. } => "tabulated",
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Density::Zero => true,
            Density::Constant { value, .. } => *value == T::zero(),
            Density::PowerLaw { coefficient, .. } => *coefficient == T::zero(),
            Density::LorentzianResonance { coefficient, .. } => *coefficient == T::zero(),
            Density::Tabulated { grid } => grid.iter().all(|p| p[1] == T::zero()),
        }
    }

    /// Density value at squared mass `s`.
    pub fn value(&self, s: T) -> T {
        match self {
            Density::Zero => T::zero(),
            Density::Constant { value, threshold } => {
                if s >= *threshold {
                    *value
                } else {
                    T::zero()
                }
            }
            Density::PowerLaw {
                coefficient,
                exponent,
                threshold,
            } => {
                if s >= *threshold && s > T::zero() {
                    *coefficient * s.powf(*exponent)
                } else {
                    T::zero()
                }
            }
            Density::LorentzianResonance {
                coefficient,
                center,
                width,
                threshold,
            } => {
                if s >= *threshold {
                    let d = s - *center;
                    *coefficient * *width / (T::PI() * (d * d + *width * *width))
                } else {
                    T::zero()
                }
            }
            Density::Tabulated { grid } => tabulated_value(grid, s),
        }
    }

    /// Lower end of the support.
    pub fn support_start(&self) -> T {
        match self {
            Density::Zero => T::zero(),
            Density::Constant { threshold, .. }
            | Density::PowerLaw { threshold, .. }
            | Density::LorentzianResonance { threshold, .. } => *threshold,
            Density::Tabulated { grid } => grid.first().map(|p| p[0]).unwrap_or_else(T::zero),
        }
    }

    /// Symbolic divergence of `∫^∞`: constants, and power laws with
    /// exponent `>= -1`, are not integrable at infinity.
    pub fn diverges_at_infinity(&self) -> bool {
        match self {
            Density::Constant { value, .. } => *value > T::zero(),
            Density::PowerLaw {
                coefficient,
                exponent,
                ..
            } => *coefficient > T::zero() && *exponent >= -T::one(),
            _ => false,
        }
    }

    /// Natural breakpoints inside `(lo, hi)` for quadrature.
    pub fn breakpoints(&self, lo: T, hi: T) -> Vec<T> {
        let mut pts = vec![lo];
        let mut push = |x: T| {
            if x > lo && x < hi {
                pts.push(x);
            }
        };
        match self {
            Density::LorentzianResonance { center, width, .. } => {
                for k in [-10.0, -3.0, -1.0, 0.0, 1.0, 3.0, 10.0] {
                    push(*center + T::lit(k) * *width);
                }
            }
            Density::Tabulated { grid } => grid.iter().for_each(|p| push(p[0])),
            _ => {}
        }
        if hi.is_finite() {
            pts.push(hi);
        }
        pts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        pts.dedup();
        pts
    }

    /// The same family with every density value multiplied by `factor >= 0`.
    pub fn scaled(&self, factor: T) -> Self {
        match self.clone() {
            Density::Zero => Density::Zero,
            Density::Constant { value, threshold } => Density::Constant {
                value: value * factor,
                threshold,
            },
            Density::PowerLaw {
                coefficient,
                exponent,
                threshold,
            } => Density::PowerLaw {
                coefficient: coefficient * factor,
                exponent,
                threshold,
            },
            Density::LorentzianResonance {
                coefficient,
                center,
                width,
                threshold,
            } => Density::LorentzianResonance {
                coefficient: coefficient * factor,
                center,
                width,
                threshold,
            },
            Density::Tabulated { grid } => Density::Tabulated {
                grid: grid.into_iter().map(|[s, v]| [s, v * factor]).collect(),
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, x: T| {
            if x.is_finite() && x >= T::zero() {
                Ok(())
            } else {
                Err(Error::validation(format!(
                    "density {}: {name} must be finite and >= 0, got {x}",
                    self.family()
                )))
            }
        };
        match self {
            Density::Zero => Ok(()),
            Density::Constant { value, threshold } => {
                nonneg("value", *value)?;
                nonneg("threshold", *threshold)
            }
            Density::PowerLaw {
                coefficient,
                exponent,
                threshold,
            } => {
                nonneg("coefficient", *coefficient)?;
                nonneg("threshold", *threshold)?;
                if !exponent.is_finite() {
                    return Err(Error::validation("density powerLaw: exponent must be finite"));
                }
                if *threshold == T::zero() && *exponent <= -T::one() && *coefficient > T::zero() {
                    return Err(Error::validation(
                        "density powerLaw: exponent <= -1 needs a positive threshold \
                         (not locally integrable at s = 0)",
                    ));
                }
                Ok(())
            }
            Density::LorentzianResonance {
                coefficient,
                center,
                width,
                threshold,
            } => {
                nonneg("coefficient", *coefficient)?;
                nonneg("center", *center)?;
                nonneg("threshold", *threshold)?;
                if !(width.is_finite() && *width > T::zero()) {
                    return Err(Error::validation(
                        "density lorentzianResonance: width must be finite and > 0",
                    ));
                }
                Ok(())
            }
            Density::Tabulated { grid } => {
                if grid.is_empty() {
                    return Err(Error::validation("density tabulated: grid is empty"));
                }
                for p in grid {
                    nonneg("node location", p[0])?;
                    nonneg("node value", p[1])?;
                }
                if grid.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(Error::validation(
                        "density tabulated: node locations must be strictly increasing",
                    ));
                }
                Ok(())
            }
        }
    }
}

fn tabulated_value<T: Real>(grid: &[[T; 2]], s: T) -> T {
    let (first, last) = match (grid.first(), grid.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return T::zero(),
    };
    if s < first[0] {
        return T::zero();
    }
    if s >= last[0] {
        return last[1];
    }
    let idx = grid.partition_point(|p| p[0] <= s);
    let [s0, v0] = grid[idx - 1];
    let [s1, v1] = grid[idx];
    v0 + (v1 - v0) * (s - s0) / (s1 - s0)
}

/// A finite value or `+∞`. Serialized as a number or the string `"+inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended<T> {
    Finite(T),
    Infinite,
}

impl<T: Real> Extended<T> {
    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(&self) -> Option<T> {
        match self {
            Extended::Finite(v) => Some(*v),
            Extended::Infinite => None,
        }
    }
}

impl<T: Real> fmt::Display for Extended<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::Infinite => f.write_str("+inf"),
        }
    }
}

impl<T: Real + Serialize> Serialize for Extended<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(v) => v.serialize(serializer),
            Extended::Infinite => serializer.serialize_str("+inf"),
        }
    }
}

/// Serialized form of [`SpectralMeasure`]; see the README for the schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MeasureDocument<T: Copy> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    pub channel: Channel,
    #[serde(default)]
    pub atoms: Vec<Atom<T>>,
    pub density: Density<T>,
    #[serde(default)]
    pub cutoff: Option<T>,
    pub witness: Witness<T>,
}

pub const MEASURE_SCHEMA: &str = "klspec/measure/v1";

/// A validated spectral measure. Immutable once constructed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "MeasureDocument<T>",
    into = "MeasureDocument<T>",
    bound(
        serialize = "T: Real + Serialize",
        deserialize = "T: Real + serde::de::DeserializeOwned"
    )
)]
pub struct SpectralMeasure<T: Real> {
    channel: Channel,
    atoms: Vec<Atom<T>>,
    density: Density<T>,
    cutoff: Option<T>,
    witness: Witness<T>,
}

impl<T: Real> TryFrom<MeasureDocument<T>> for SpectralMeasure<T> {
    type Error = Error;

    fn try_from(doc: MeasureDocument<T>) -> Result<Self> {
        if let Some(schema) = &doc.schema {
            if schema != MEASURE_SCHEMA {
                return Err(Error::validation(format!(
                    "unknown measure schema {schema:?}, expected {MEASURE_SCHEMA:?}"
                )));
            }
        }
        SpectralMeasure::new(doc.channel, doc.atoms, doc.density, doc.cutoff, doc.witness)
    }
}

impl<T: Real> From<SpectralMeasure<T>> for MeasureDocument<T> {
    fn from(m: SpectralMeasure<T>) -> Self {
        MeasureDocument {
            schema: Some(MEASURE_SCHEMA.to_string()),
            channel: m.channel,
            atoms: m.atoms,
            density: m.density,
            cutoff: m.cutoff,
            witness: m.witness,
        }
    }
}

impl<T: Real> SpectralMeasure<T> {
    pub fn new(
        channel: Channel,
        atoms: Vec<Atom<T>>,
        density: Density<T>,
        cutoff: Option<T>,
        witness: Witness<T>,
    ) -> Result<Self> {
        let m = SpectralMeasure {
            channel,
            atoms,
            density,
            cutoff,
            witness,
        };
        m.validate()?;
        Ok(m)
    }

    /// `δ(s - mass2)` in the scalar channel, witness `(1, 0)`.
    pub fn free_scalar(mass2: T) -> Result<Self> {
        Self::new(
            Channel::Scalar,
            vec![Atom::new(mass2, T::one())],
            Density::Zero,
            None,
            Witness::new(T::one(), T::zero()),
        )
    }

    /// The zero measure.
    pub fn zero(channel: Channel) -> Self {
        SpectralMeasure {
            channel,
            atoms: Vec::new(),
            density: Density::Zero,
            cutoff: None,
            witness: Witness::new(T::zero(), T::zero()),
        }
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn density(&self) -> &Density<T> {
        &self.density
    }

    pub fn cutoff(&self) -> Option<T> {
        self.cutoff
    }

    pub fn witness(&self) -> Witness<T> {
        self.witness
    }

    pub fn with_channel(&self, channel: Channel) -> Self {
        SpectralMeasure {
            channel,
            ..self.clone()
        }
    }

    pub fn with_cutoff(&self, cutoff: Option<T>) -> Result<Self> {
        Self::new(
            self.channel,
            self.atoms.clone(),
            self.density.clone(),
            cutoff,
            self.witness,
        )
    }

    pub fn with_witness(&self, witness: Witness<T>) -> Result<Self> {
        Self::new(
            self.channel,
            self.atoms.clone(),
            self.density.clone(),
            self.cutoff,
            witness,
        )
    }

    /// `factor * self` for `factor >= 0`; the witness constant scales along.
    pub fn scaled(&self, factor: T) -> Result<Self> {
        if !(factor.is_finite() && factor >= T::zero()) {
            return Err(Error::domain("measure scale factor must be finite and >= 0"));
        }
        Self::new(
            self.channel,
            self.atoms
                .iter()
                .map(|a| Atom::new(a.mass2, a.weight * factor))
                .collect(),
            self.density.scaled(factor),
            self.cutoff,
            Witness::new(self.witness.constant * factor, self.witness.power),
        )
    }

    /// Checks positivity, finiteness and atom distinctness.
    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.atoms.iter().enumerate() {
            if !(a.mass2.is_finite() && a.mass2 >= T::zero()) {
                return Err(Error::validation(format!(
                    "atom {i}: location must be finite and >= 0, got {}",
                    a.mass2
                )));
            }
            if !(a.weight.is_finite() && a.weight >= T::zero()) {
                return Err(Error::validation(format!(
                    "atom {i}: weight must be finite and >= 0 (positive measure), got {}",
                    a.weight
                )));
            }
            if self.atoms[..i].iter().any(|b| b.mass2 == a.mass2) {
                return Err(Error::validation(format!(
                    "atom {i}: duplicate location {}; atoms must be distinct",
                    a.mass2
                )));
            }
            if let Some(c) = self.cutoff {
                if a.mass2 > c {
                    return Err(Error::validation(format!(
                        "atom {i}: location {} beyond cutoff {c}",
                        a.mass2
                    )));
                }
            }
        }
        self.density.validate()?;
        if let Some(c) = self.cutoff {
            if !(c.is_finite() && c > T::zero()) {
                return Err(Error::validation(format!(
                    "cutoff must be finite and > 0, got {c}"
                )));
            }
        }
        let w = self.witness;
        if !(w.constant.is_finite() && w.constant >= T::zero() && w.power.is_finite() && w.power >= T::zero())
        {
            return Err(Error::validation(
                "boundedness witness (C, N) must be finite and >= 0",
            ));
        }
        Ok(())
    }

    /// Upper end of the density support: the cutoff, or `+∞`.
    pub fn support_end(&self) -> T {
        self.cutoff.unwrap_or_else(T::infinity)
    }

    /// Splits off the atom at `target_mass2` (matched to [`DEFAULT_ATOM_MATCH`]).
    /// Returns its weight `Z` (zero when there is none) and the remainder.
    pub fn decompose(&self, target_mass2: T) -> Result<(T, SpectralMeasure<T>)> {
        self.decompose_with(target_mass2, T::lit(DEFAULT_ATOM_MATCH))
    }

    pub fn decompose_with(&self, target_mass2: T, atol: T) -> Result<(T, SpectralMeasure<T>)> {
        if !(target_mass2.is_finite() && target_mass2 >= T::zero()) {
            return Err(Error::domain(format!(
                "target squared mass must be finite and >= 0, got {target_mass2}"
            )));
        }
        self.validate()?;
        let nearest = self
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| (i, (a.mass2 - target_mass2).abs()))
            .filter(|(_, d)| *d <= atol)
            .fold(None, |best: Option<(usize, T)>, (i, d)| match best {
                Some((_, bd)) if bd <= d => best,
                _ => Some((i, d)),
            });
        let mut sigma = self.clone();
        let z = match nearest {
            Some((i, _)) => sigma.atoms.remove(i).weight,
            None => T::zero(),
        };
        Ok((z, sigma))
    }

    /// `∫_0^{up_to} dρ` (closed upper end), with the default quadrature tolerance.
    pub fn total_mass(&self, up_to: Option<T>) -> Result<Extended<T>> {
        self.total_mass_with(up_to, &Tolerance::default())
    }

    pub fn total_mass_with(&self, up_to: Option<T>, tol: &Tolerance<T>) -> Result<Extended<T>> {
        Ok(self.total_mass_estimate(up_to, tol)?.0)
    }

    /// Total mass together with the quadrature error estimate.
    pub fn total_mass_estimate(&self, up_to: Option<T>, tol: &Tolerance<T>) -> Result<(Extended<T>, T)> {
        if let Some(l) = up_to {
            if l.is_nan() {
                return Err(Error::domain("upper limit is NaN"));
            }
        }
        let limit = match (up_to, self.cutoff) {
            (Some(l), Some(c)) => l.min(c),
            (Some(l), None) => l,
            (None, Some(c)) => c,
            (None, None) => T::infinity(),
        };
        let atoms: T = self
            .atoms
            .iter()
            .filter(|a| a.mass2 <= limit)
            .map(|a| a.weight)
            .sum();
        if self.density.is_zero() {
            return Ok((Extended::Finite(atoms), T::zero()));
        }
        let start = self.density.support_start();
        if limit <= start {
            return Ok((Extended::Finite(atoms), T::zero()));
        }
        let density = &self.density;
        if let Density::PowerLaw { coefficient, exponent, .. } = *density {
            if let Some(v) = power_law_mass(coefficient, exponent, start, limit) {
                let total = match v {
                    Extended::Finite(m) => Extended::Finite(atoms + m),
                    Extended::Infinite => Extended::Infinite,
                };
                return Ok((total, T::zero()));
            }
        }
        let est = if limit.is_finite() {
            let pts = density.breakpoints(start, limit);
            quad::integrate_pieces(|s| density.value(s), &pts, tol)
        } else {
            if let Density::Tabulated { .. } = density {
                return Err(Error::Unsupported(
                    "tabulated density with unbounded support: supply a cutoff".into(),
                ));
            }
            if density.diverges_at_infinity() {
                return Ok((Extended::Infinite, T::zero()));
            }
            let pts = density.breakpoints(start, T::infinity());
            integrate_unbounded(|s| density.value(s), &pts, tol)
        };
        let est = est.into_result("total mass of density")?;
        Ok((Extended::Finite(atoms + est.value), est.error))
    }

    /// True iff the witness bound holds at every `L` of an increasing grid.
    pub fn check_polynomial_bound(&self, grid: &[T]) -> Result<bool> {
        if grid.is_empty() {
            return Err(Error::domain("polynomial bound grid is empty"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) || grid.iter().any(|l| !(*l >= T::zero())) {
            return Err(Error::domain(
                "polynomial bound grid must be nonnegative and strictly increasing",
            ));
        }
        let Witness { constant, power } = self.witness;
        for &l in grid {
            let bound = constant * (T::one() + l.powf(power));
            let (mass, err) = self.total_mass_estimate(Some(l), &Tolerance::default())?;
            match mass {
                Extended::Finite(m) if m - err <= bound => {}
                _ => return Ok(false),
            }
        }
        Ok(true)
    }

    /// Z, the continuum total and the ETCR sum-rule diagnostics at one mass.
    pub fn renormalization_report(&self, target_mass2: T) -> Result<RenormalizationReport<T>> {
        let (z, sigma) = self.decompose(target_mass2)?;
        let sigma_total = sigma.total_mass(None)?;
        let rho_total = self.total_mass(None)?;
        let etcr_consistent = match sigma_total {
            Extended::Finite(s) if z > T::zero() => {
                let implied = etcr_z(s)?;
                (implied - z).abs() <= T::lit(1e-8) * z.max(implied)
            }
            _ => false,
        };
        Ok(RenormalizationReport {
            target_mass2,
            z,
            sigma_total,
            rho_total,
            etcr_consistent,
            z_bound_satisfied: z <= T::one(),
        })
    }

    /// Reads the measure against the singularity hypothesis, with or
    /// without the equal-time commutation relations.
    pub fn classify(&self, target_mass2: T, etcr_assumed: bool) -> Result<Classification<T>> {
        // Z and the divergence flag are computed independently of each other.
        let (z, _) = self.decompose(target_mass2)?;
        let rho_total = self.total_mass(None)?;
        let divergent = !rho_total.is_finite();

        let (forced_z, etcr_inconsistent, etcr_sum_rule_z) = if etcr_assumed {
            match rho_total {
                Extended::Infinite => (Some(T::zero()), z > T::zero(), None),
                Extended::Finite(total) if total > T::zero() => (None, false, Some(T::one() / total)),
                Extended::Finite(_) => (None, false, None),
            }
        } else {
            (None, false, None)
        };

        let conjecture = match (divergent, etcr_assumed) {
            (false, _) => ConjectureStatus::SingularityExcluded,
            (true, false) if z > T::zero() => ConjectureStatus::Counterexample,
            (true, false) => ConjectureStatus::Consistent,
            (true, true) => ConjectureStatus::ZeroForced,
        };

        Ok(Classification {
            target_mass2,
            z,
            rho_total,
            singularity_compatible: divergent,
            etcr_assumed,
            forced_z,
            etcr_inconsistent,
            etcr_sum_rule_z,
            conjecture,
        })
    }
}

/// `∫_a^b c s^α ds` in closed form; `None` when `a = 0` (left to quadrature).
fn power_law_mass<T: Real>(c: T, alpha: T, a: T, b: T) -> Option<Extended<T>> {
    if a <= T::zero() {
        return None;
    }
    let e = alpha + T::one();
    if b.is_infinite() {
        if e >= T::zero() {
            return Some(Extended::Infinite);
        }
        return Some(Extended::Finite(-c * a.powf(e) / e));
    }
    if e == T::zero() {
        return Some(Extended::Finite(c * (b / a).ln()));
    }
    Some(Extended::Finite(c * (b.powf(e) - a.powf(e)) / e))
}

/// Integrates over `[pts[0], ∞)` honouring the finite breakpoints in `pts`.
pub(crate) fn integrate_unbounded<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    pts: &[T],
    tol: &Tolerance<T>,
) -> quad::Estimate<T> {
    let last = *pts.last().expect("at least the lower end");
    let head = if pts.len() > 1 {
        quad::integrate_pieces(&mut f, pts, tol)
    } else {
        quad::Estimate::zero()
    };
    let tail = quad::integrate_to_infinity(&mut f, last, tol);
    quad::Estimate {
        value: head.value + tail.value,
        error: head.error + tail.error,
        abs_value: head.abs_value + tail.abs_value,
        converged: head.converged && tail.converged,
        evaluations: head.evaluations + tail.evaluations,
    }
}

/// The positive root of `Z² + σ Z - 1 = 0`, i.e. `1/Z = Z + σ`.
pub fn etcr_z<T: Real>(sigma_total: T) -> Result<T> {
    if !(sigma_total.is_finite() && sigma_total >= T::zero()) {
        return Err(Error::domain(format!(
            "continuum total must be finite and >= 0, got {sigma_total}"
        )));
    }
    // 2 / (σ + sqrt(σ² + 4)) avoids the cancellation in (-σ + sqrt(σ² + 4)) / 2.
    let two = T::lit(2.0);
    let root = if sigma_total > T::lit(1e150) {
        sigma_total
    } else {
        (sigma_total * sigma_total + T::lit(4.0)).sqrt()
    };
    Ok(two / (sigma_total + root))
}

/// Field-strength diagnostics of a measure at one target mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", bound(serialize = "T: Real + Serialize"))]
pub struct RenormalizationReport<T: Real> {
    pub target_mass2: T,
    pub z: T,
    pub sigma_total: Extended<T>,
    pub rho_total: Extended<T>,
    /// `1/Z = Z + ∫dσ` holds (within 1e-8 relative).
    pub etcr_consistent: bool,
    pub z_bound_satisfied: bool,
}

/// Status of the claim "singularity hypothesis implies Z = 0".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum ConjectureStatus {
    /// Finite total mass: the scaling degree is at most the free value.
    SingularityExcluded,
    /// Divergent total mass together with a nonzero atom, no ETCR.
    Counterexample,
    /// Divergent total mass with no atom at the target mass.
    Consistent,
    /// ETCR assumed and total mass divergent: only Z = 0 is admissible.
    ZeroForced,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", bound(serialize = "T: Real + Serialize"))]
pub struct Classification<T: Real> {
    pub target_mass2: T,
    /// Atom weight from [`SpectralMeasure::decompose`].
    pub z: T,
    pub rho_total: Extended<T>,
    /// Divergent total mass, necessary for a scaling degree above 2.
    pub singularity_compatible: bool,
    pub etcr_assumed: bool,
    /// `Some(0)` when the ETCR together with a divergent total forces Z = 0.
    pub forced_z: Option<T>,
    /// ETCR assumed, total divergent, yet the measure carries `0 < Z`.
    pub etcr_inconsistent: bool,
    /// `1 / ∫dρ` when the ETCR is assumed and the total is finite.
    pub etcr_sum_rule_z: Option<T>,
    pub conjecture: ConjectureStatus,
}

/// Fermion measures ρ₁ (vector part) and ρ₂ (scalar part). No cross-bound
/// between the two is enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct FermionMeasures<T: Real> {
    vector: SpectralMeasure<T>,
    scalar: SpectralMeasure<T>,
}

impl<T: Real> FermionMeasures<T> {
    pub fn new(vector: SpectralMeasure<T>, scalar: SpectralMeasure<T>) -> Result<Self> {
        if vector.channel() != Channel::FermionVector {
            return Err(Error::validation("fermion vector measure has the wrong channel"));
        }
        if scalar.channel() != Channel::FermionScalar {
            return Err(Error::validation("fermion scalar measure has the wrong channel"));
        }
        Ok(FermionMeasures { vector, scalar })
    }

    pub fn vector(&self) -> &SpectralMeasure<T> {
        &self.vector
    }

    pub fn scalar(&self) -> &SpectralMeasure<T> {
        &self.scalar
    }

    /// Z₂: atom of ρ₁ at the electron mass.
    pub fn z2(&self, electron_mass2: T) -> Result<T> {
        Ok(self.vector.decompose(electron_mass2)?.0)
    }
}

/// Z₃: atom of the photon field-strength measure at zero mass.
pub fn photon_z3<T: Real>(measure: &SpectralMeasure<T>) -> Result<T> {
    if measure.channel() != Channel::PhotonFieldStrength {
        return Err(Error::validation(format!(
            "Z3 needs a photonFieldStrength measure, got {}",
            measure.channel()
        )));
    }
    Ok(measure.decompose(T::zero())?.0)
}
