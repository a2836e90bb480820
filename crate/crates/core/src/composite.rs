//! Classical composite-field model: a field `C` of mass `m_C` built from a
//! constituent field `A` through `C = F(A)`, with bare field
//! `C₀ = Z_C^{1/2} C`.
//!
//! Spacetime points are `[t, x, y, z]` with metric `(+,-,-,-)`. Grid fields
//! live on a 1+1 dimensional box in `(t, x)` and ignore `y`, `z`.

use std::io;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `m_C > 2m`: the composite can decay into two constituents at rest.
pub fn decay_threshold<T: Real>(m_c: T, m: T) -> Result<bool> {
    if !(m_c >= T::zero() && m >= T::zero()) || !m_c.is_finite() || !m.is_finite() {
        return Err(Error::domain("masses must be finite and >= 0"));
    }
    Ok(m_c > T::lit(2.0) * m)
}

/// Regular `(t, x)` lattice with `nt × nx` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Lattice<T> {
    pub t0: T,
    pub x0: T,
    pub dt: T,
    pub dx: T,
    pub nt: usize,
    pub nx: usize,
}

impl<T: Real> Lattice<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: T| v.is_finite();
        if !(ok(self.t0) && ok(self.x0) && ok(self.dt) && ok(self.dx)) {
            return Err(Error::validation("lattice: origin and spacings must be finite"));
        }
        if self.dt <= T::zero() || self.dx <= T::zero() {
            return Err(Error::validation("lattice: spacings must be > 0"));
        }
        if self.nt < 2 || self.nx < 2 {
            return Err(Error::validation("lattice: need at least 2 nodes per axis"));
        }
        Ok(())
    }

    pub fn t(&self, i: usize) -> T {
        self.t0 + self.dt * T::from_usize_lossy(i)
    }

    pub fn x(&self, j: usize) -> T {
        self.x0 + self.dx * T::from_usize_lossy(j)
    }

    pub fn point(&self, i: usize, j: usize) -> [T; 4] {
        [self.t(i), self.x(j), T::zero(), T::zero()]
    }

    /// The lattice of interior nodes.
    pub fn interior(&self) -> Lattice<T> {
        Lattice {
            t0: self.t(1),
            x0: self.x(1),
            dt: self.dt,
            dx: self.dx,
            nt: self.nt.saturating_sub(2),
            nx: self.nx.saturating_sub(2),
        }
    }

    fn check_interior(&self, min: usize) -> Result<()> {
        if self.nt < min + 2 || self.nx < min + 2 {
            return Err(Error::domain(format!(
                "grid needs at least {min} interior points per axis, got {} x {}",
                self.nt.saturating_sub(2),
                self.nx.saturating_sub(2)
            )));
        }
        Ok(())
    }
}

/// Field sampled on a lattice; `values[i][j]` is the value at `(t_i, x_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GridField<T> {
    pub t0: T,
    pub x0: T,
    pub dt: T,
    pub dx: T,
    pub values: Vec<Vec<T>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow<T> {
    t: T,
    x: T,
    value: T,
}

impl<T: Real> GridField<T> {
    pub fn new(lattice: Lattice<T>, values: Vec<Vec<T>>) -> Result<Self> {
        let g = GridField {
            t0: lattice.t0,
            x0: lattice.x0,
            dt: lattice.dt,
            dx: lattice.dx,
            values,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn lattice(&self) -> Lattice<T> {
        Lattice {
            t0: self.t0,
            x0: self.x0,
            dt: self.dt,
            dx: self.dx,
            nt: self.values.len(),
            nx: self.values.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lat = self.lattice();
        lat.validate()?;
        if self.values.iter().any(|row| row.len() != lat.nx) {
            return Err(Error::validation("grid: rows must all have the same length"));
        }
        if self.values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("grid: values must be finite"));
        }
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i][j]
    }

    /// Cell index and fractional offset along one axis. Points within a
    /// rounding slack of the box edge are clamped onto it.
    fn locate_axis(origin: T, step: T, n: usize, u: T) -> Option<(usize, T)> {
        let s = (u - origin) / step;
        let last = T::from_usize_lossy(n - 1);
        let slack = T::lit(1e-9).max(T::epsilon() * T::lit(16.0)) * last.max(T::one());
        if !(s >= -slack && s <= last + slack) {
            return None;
        }
        let s = s.max(T::zero()).min(last);
        let i = s.floor().to_usize().unwrap_or(0).min(n - 2);
        Some((i, s - T::from_usize_lossy(i)))
    }

    fn locate(&self, x: [T; 4]) -> Result<(usize, T, usize, T)> {
        let lat = self.lattice();
        let ti = Self::locate_axis(lat.t0, lat.dt, lat.nt, x[0]);
        let xi = Self::locate_axis(lat.x0, lat.dx, lat.nx, x[1]);
        match (ti, xi) {
            (Some((i, ft)), Some((j, fx))) => Ok((i, ft, j, fx)),
            _ => Err(Error::domain(format!(
                "point (t, x) = ({}, {}) outside the grid box [{}, {}] x [{}, {}]",
                x[0],
                x[1],
                lat.t0,
                lat.t(lat.nt - 1),
                lat.x0,
                lat.x(lat.nx - 1)
            ))),
        }
    }

    fn bilinear(&self, i: usize, ft: T, j: usize, fx: T, node: impl Fn(usize, usize) -> T) -> T {
        let one = T::one();
        (one - ft) * ((one - fx) * node(i, j) + fx * node(i, j + 1))
            + ft * ((one - fx) * node(i + 1, j) + fx * node(i + 1, j + 1))
    }

    /// Bilinear interpolation.
    pub fn value_at(&self, x: [T; 4]) -> Result<T> {
        let (i, ft, j, fx) = self.locate(x)?;
        Ok(self.bilinear(i, ft, j, fx, |a, b| self.get(a, b)))
    }

    /// `∂_t` at a node: central inside, one-sided on the edge.
    fn node_dt(&self, i: usize, j: usize) -> T {
        let n = self.values.len();
        let two = T::lit(2.0);
        if i == 0 {
            (self.get(1, j) - self.get(0, j)) / self.dt
        } else if i == n - 1 {
            (self.get(i, j) - self.get(i - 1, j)) / self.dt
        } else {
            (self.get(i + 1, j) - self.get(i - 1, j)) / (two * self.dt)
        }
    }

    fn node_dx(&self, i: usize, j: usize) -> T {
        let n = self.values[0].len();
        let two = T::lit(2.0);
        if j == 0 {
            (self.get(i, 1) - self.get(i, 0)) / self.dx
        } else if j == n - 1 {
            (self.get(i, j) - self.get(i, j - 1)) / self.dx
        } else {
            (self.get(i, j + 1) - self.get(i, j - 1)) / (two * self.dx)
        }
    }

    /// `∂_μ` from nodal finite differences, interpolated bilinearly.
    pub fn gradient_at(&self, x: [T; 4]) -> Result<[T; 4]> {
        let (i, ft, j, fx) = self.locate(x)?;
        let d_t = self.bilinear(i, ft, j, fx, |a, b| self.node_dt(a, b));
        let d_x = self.bilinear(i, ft, j, fx, |a, b| self.node_dx(a, b));
        Ok([d_t, d_x, T::zero(), T::zero()])
    }

    /// Second-order central `□ = ∂_t² - ∂_x²` at an interior node.
    pub fn box_at_node(&self, i: usize, j: usize) -> T {
        let two = T::lit(2.0);
        let c = self.get(i, j);
        let tt = (self.get(i + 1, j) - two * c + self.get(i - 1, j)) / (self.dt * self.dt);
        let xx = (self.get(i, j + 1) - two * c + self.get(i, j - 1)) / (self.dx * self.dx);
        tt - xx
    }

    /// Writes `t,x,value` rows in time-major order.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()>
    where
        T: Serialize,
    {
        let lat = self.lattice();
        let mut wr = csv::Writer::from_writer(w);
        for (i, row) in self.values.iter().enumerate() {
            for (j, &value) in row.iter().enumerate() {
                wr.serialize(CsvRow { t: lat.t(i), x: lat.x(j), value })
                    .map_err(|e| Error::validation(format!("csv write: {e}")))?;
            }
        }
        wr.flush().map_err(|e| Error::validation(format!("csv write: {e}")))
    }

    /// Reads `t,x,value` rows (any order) covering a complete regular lattice.
    pub fn read_csv<R: io::Read>(r: R) -> Result<Self>
    where
        T: DeserializeOwned,
    {
        let mut rows = Vec::new();
        for rec in csv::Reader::from_reader(r).deserialize::<CsvRow<T>>() {
            rows.push(rec.map_err(|e| Error::validation(format!("csv read: {e}")))?);
        }
        let axis = |get: fn(&CsvRow<T>) -> T| -> Result<Vec<T>> {
            let mut v: Vec<T> = rows.iter().map(get).collect();
            if v.iter().any(|u| !u.is_finite()) {
                return Err(Error::validation("csv grid: coordinates must be finite"));
            }
            v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            v.dedup_by(|a, b| {
                let scale = a.abs().max(b.abs()).max(T::one());
                (*a - *b).abs() <= T::lit(1e-9) * scale
            });
            Ok(v)
        };
        let ts = axis(|r| r.t)?;
        let xs = axis(|r| r.x)?;
        if ts.len() < 2 || xs.len() < 2 {
            return Err(Error::validation("csv grid: need at least 2 distinct t and x values"));
        }
        if rows.len() != ts.len() * xs.len() {
            return Err(Error::validation(format!(
                "csv grid: {} rows do not fill a {} x {} lattice",
                rows.len(),
                ts.len(),
                xs.len()
            )));
        }
        let spacing = |v: &[T], name: &str| -> Result<T> {
            let h = (v[v.len() - 1] - v[0]) / T::from_usize_lossy(v.len() - 1);
            for w in v.windows(2) {
                if ((w[1] - w[0]) - h).abs() > T::lit(1e-6) * h {
                    return Err(Error::validation(format!("csv grid: {name} spacing is not uniform")));
                }
            }
            Ok(h)
        };
        let lattice = Lattice {
            t0: ts[0],
            x0: xs[0],
            dt: spacing(&ts, "t")?,
            dx: spacing(&xs, "x")?,
            nt: ts.len(),
            nx: xs.len(),
        };
        let mut values = vec![vec![T::nan(); lattice.nx]; lattice.nt];
        let index = |u: T, origin: T, h: T| (((u - origin) / h).round()).to_usize().unwrap_or(usize::MAX);
        for row in &rows {
            let i = index(row.t, lattice.t0, lattice.dt);
            let j = index(row.x, lattice.x0, lattice.dx);
            let cell = values
                .get_mut(i)
                .and_then(|r| r.get_mut(j))
                .ok_or_else(|| Error::validation("csv grid: row off the lattice"))?;
            if !cell.is_nan() {
                return Err(Error::validation("csv grid: duplicate (t, x) row"));
            }
            *cell = row.value;
        }
        GridField::new(lattice, values)
    }
}

/// Real scalar field on spacetime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "camelCase", deny_unknown_fields)]
pub enum ClassicalField<T> {
    /// `amplitude · cos(k₀t - k⃗·x⃗)`.
    PlaneWave { k: [T; 4], amplitude: T },
    /// `amplitude · exp(-Σ_μ (x_μ - c_μ)² / (2 w_μ²))`.
    GaussianPacket { amplitude: T, center: [T; 4], widths: [T; 4] },
    Zero,
    Grid(GridField<T>),
}

impl<T: Real> ClassicalField<T> {
    /// Plane wave with `k² = mass²`, spatial momentum `p`.
    pub fn plane_wave_on_shell(mass: T, p: [T; 3], amplitude: T) -> Self {
        let k0 = (mass * mass + p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        ClassicalField::PlaneWave { k: [k0, p[0], p[1], p[2]], amplitude }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClassicalField::PlaneWave { k, amplitude } => {
                if k.iter().chain([amplitude]).any(|v| !v.is_finite()) {
                    return Err(Error::validation("planeWave: k and amplitude must be finite"));
                }
            }
            ClassicalField::GaussianPacket { amplitude, center, widths } => {
                if center.iter().chain([amplitude]).any(|v| !v.is_finite()) {
                    return Err(Error::validation("gaussianPacket: amplitude and center must be finite"));
                }
                if widths.iter().any(|w| !(w.is_finite() && *w > T::zero())) {
                    return Err(Error::validation("gaussianPacket: widths must be finite and > 0"));
                }
            }
            ClassicalField::Zero => {}
            ClassicalField::Grid(g) => g.validate()?,
        }
        Ok(())
    }

    pub fn is_grid(&self) -> bool {
        matches!(self, ClassicalField::Grid(_))
    }

    fn phase(k: &[T; 4], x: [T; 4]) -> T {
        k[0] * x[0] - k[1] * x[1] - k[2] * x[2] - k[3] * x[3]
    }

    fn packet_offsets(center: &[T; 4], widths: &[T; 4], x: [T; 4]) -> ([T; 4], T) {
        let mut d = [T::zero(); 4];
        let mut q = T::zero();
        for mu in 0..4 {
            d[mu] = (x[mu] - center[mu]) / (widths[mu] * widths[mu]);
            q += (x[mu] - center[mu]) * d[mu];
        }
        (d, (-q / T::lit(2.0)).exp())
    }

    pub fn value(&self, x: [T; 4]) -> Result<T> {
        Ok(match self {
            ClassicalField::PlaneWave { k, amplitude } => *amplitude * Self::phase(k, x).cos(),
            ClassicalField::GaussianPacket { amplitude, center, widths } => {
                *amplitude * Self::packet_offsets(center, widths, x).1
            }
            ClassicalField::Zero => T::zero(),
            ClassicalField::Grid(g) => g.value_at(x)?,
        })
    }

    /// `∂_μ` (lower index).
    pub fn gradient(&self, x: [T; 4]) -> Result<[T; 4]> {
        Ok(match self {
            ClassicalField::PlaneWave { k, amplitude } => {
                let s = -*amplitude * Self::phase(k, x).sin();
                [s * k[0], -s * k[1], -s * k[2], -s * k[3]]
            }
            ClassicalField::GaussianPacket { amplitude, center, widths } => {
                let (d, e) = Self::packet_offsets(center, widths, x);
                let c = *amplitude * e;
                [-c * d[0], -c * d[1], -c * d[2], -c * d[3]]
            }
            ClassicalField::Zero => [T::zero(); 4],
            ClassicalField::Grid(g) => g.gradient_at(x)?,
        })
    }

    /// Exact `□ = ∂_t² - ∇²` for closed-form families.
    fn box_exact(&self, x: [T; 4]) -> Option<T> {
        match self {
            ClassicalField::PlaneWave { k, amplitude } => {
                let k2 = k[0] * k[0] - k[1] * k[1] - k[2] * k[2] - k[3] * k[3];
                Some(-k2 * *amplitude * Self::phase(k, x).cos())
            }
            ClassicalField::GaussianPacket { amplitude, center, widths } => {
                let (d, e) = Self::packet_offsets(center, widths, x);
                let second = |mu: usize| d[mu] * d[mu] - T::one() / (widths[mu] * widths[mu]);
                Some(*amplitude * e * (second(0) - second(1) - second(2) - second(3)))
            }
            ClassicalField::Zero => Some(T::zero()),
            ClassicalField::Grid(_) => None,
        }
    }

    /// Samples the field at the lattice nodes `(t, x, 0, 0)`.
    pub fn sample(&self, lattice: &Lattice<T>) -> Result<GridField<T>> {
        lattice.validate()?;
        let values = (0..lattice.nt)
            .map(|i| (0..lattice.nx).map(|j| self.value(lattice.point(i, j))).collect())
            .collect::<Result<Vec<Vec<T>>>>()?;
        GridField::new(*lattice, values)
    }
}

/// The composing function `F` in `C = F(A)`. Every family is C¹.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "camelCase")]
pub enum ComposingFunction<T> {
    Identity,
    /// `a u²`.
    Quadratic { a: T },
    /// Cubic Hermite through `[u, F(u)]` nodes with three-point slopes,
    /// extended linearly beyond the end nodes.
    TabulatedSmooth { grid: Vec<[T; 2]> },
}

impl<T: Real> ComposingFunction<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            ComposingFunction::Identity => Ok(()),
            ComposingFunction::Quadratic { a } if a.is_finite() => Ok(()),
            ComposingFunction::Quadratic { .. } => Err(Error::validation("quadratic: coefficient must be finite")),
            ComposingFunction::TabulatedSmooth { grid } => {
                if grid.len() < 2 {
                    return Err(Error::validation("tabulatedSmooth: need at least 2 nodes"));
                }
                if grid.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::validation("tabulatedSmooth: nodes must be finite"));
                }
                if grid.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(Error::validation("tabulatedSmooth: abscissae must be strictly increasing"));
                }
                Ok(())
            }
        }
    }

    /// Slope at node `i`.
    fn node_slope(grid: &[[T; 2]], i: usize) -> T {
        let secant = |a: usize| (grid[a + 1][1] - grid[a][1]) / (grid[a + 1][0] - grid[a][0]);
        let n = grid.len();
        if i == 0 {
            secant(0)
        } else if i == n - 1 {
            secant(n - 2)
        } else {
            let hl = grid[i][0] - grid[i - 1][0];
            let hr = grid[i + 1][0] - grid[i][0];
            (hr * secant(i - 1) + hl * secant(i)) / (hl + hr)
        }
    }

    /// `(F(u), F'(u))`.
    pub fn eval_with_derivative(&self, u: T) -> (T, T) {
        match self {
            ComposingFunction::Identity => (u, T::one()),
            ComposingFunction::Quadratic { a } => (*a * u * u, T::lit(2.0) * *a * u),
            ComposingFunction::TabulatedSmooth { grid } => {
                let n = grid.len();
                if u <= grid[0][0] {
                    let d = Self::node_slope(grid, 0);
                    return (grid[0][1] + d * (u - grid[0][0]), d);
                }
                if u >= grid[n - 1][0] {
                    let d = Self::node_slope(grid, n - 1);
                    return (grid[n - 1][1] + d * (u - grid[n - 1][0]), d);
                }
                let i = grid.partition_point(|p| p[0] <= u).saturating_sub(1).min(n - 2);
                let (x0, y0, x1, y1) = (grid[i][0], grid[i][1], grid[i + 1][0], grid[i + 1][1]);
                let h = x1 - x0;
                let (d0, d1) = (Self::node_slope(grid, i), Self::node_slope(grid, i + 1));
                let s = (u - x0) / h;
                let (one, two, three) = (T::one(), T::lit(2.0), T::lit(3.0));
                let h00 = (one + two * s) * (one - s) * (one - s);
                let h10 = s * (one - s) * (one - s);
                let h01 = s * s * (three - two * s);
                let h11 = s * s * (s - one);
                let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
                let six = T::lit(6.0);
                let dh00 = six * s * (s - one);
                let dh10 = (one - s) * (one - three * s);
                let dh01 = -dh00;
                let dh11 = s * (three * s - two);
                let deriv = (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1;
                (value, deriv)
            }
        }
    }

    pub fn eval(&self, u: T) -> T {
        self.eval_with_derivative(u).0
    }

    /// `c · F`. Identity has no closed family for this and is refused.
    pub fn scaled(&self, c: T) -> Result<Self> {
        match self {
            ComposingFunction::Identity => Err(Error::Unsupported("scaling the identity family".into())),
            ComposingFunction::Quadratic { a } => Ok(ComposingFunction::Quadratic { a: c * *a }),
            ComposingFunction::TabulatedSmooth { grid } => Ok(ComposingFunction::TabulatedSmooth {
                grid: grid.iter().map(|&[u, f]| [u, c * f]).collect(),
            }),
        }
    }
}

/// Masses, field-strength constant and composing function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositeModel<T> {
    #[serde(rename = "mC")]
    pub m_c: T,
    pub m: T,
    #[serde(rename = "zC")]
    pub z_c: T,
    pub f: ComposingFunction<T>,
}

/// `(ℒ₀, ℒ_I, ℒ)` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LagrangianDensities<T> {
    pub free: T,
    pub interaction: T,
    pub total: T,
}

/// Outcome of the free-field check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FreeFieldVerdict<T> {
    /// `max |C - F(A)|`.
    pub constraint_residual: T,
    /// `max |□C + m_C² C|`.
    pub free_residual: T,
    /// `max` of the Euler-Lagrange residual.
    pub el_residual: T,
    /// `max(1, m_C² max|C|)`.
    pub scale: T,
    pub tol: T,
    pub constraint_holds: bool,
    /// `constraint_residual < tol ⇒ free_residual < tol · scale`.
    pub consistent: bool,
}

/// Message attached to the refusal for `Z_C = 0`.
pub const ZERO_Z_REPORT: &str = "renormalization constant Z_C is zero: a composite field that is a \
functional of the constituent field is not a free field of its mass, so the free-field conclusion does not apply";

/// Per-node quantities on the interior of the evaluation lattice.
struct NodeTerms<T> {
    c: T,
    constraint: T,
    free: T,
}

impl<T: Real> CompositeModel<T> {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: T| v.is_finite() && v >= T::zero();
        if !(nonneg(self.m_c) && nonneg(self.m)) {
            return Err(Error::validation("composite model: masses must be finite and >= 0"));
        }
        if !nonneg(self.z_c) {
            return Err(Error::validation("composite model: Z_C must be finite and >= 0"));
        }
        self.f.validate()
    }

    pub fn decay_threshold(&self) -> Result<bool> {
        decay_threshold(self.m_c, self.m)
    }

    /// `ℒ₀ = ½(∂C₀·∂C₀ - m_C² C₀²)` with `C₀ = Z_C^{1/2} C`,
    /// `ℒ_I = ½(C - F(A))²`, `ℒ = ℒ₀ + ℒ_I`.
    pub fn lagrangian_density(
        &self,
        c: &ClassicalField<T>,
        a: &ClassicalField<T>,
        x: [T; 4],
    ) -> Result<LagrangianDensities<T>> {
        self.validate()?;
        let half = T::lit(0.5);
        let cv = c.value(x)?;
        let g = c.gradient(x)?;
        let av = a.value(x)?;
        let dd = g[0] * g[0] - g[1] * g[1] - g[2] * g[2] - g[3] * g[3];
        let free = half * self.z_c * (dd - self.m_c * self.m_c * cv * cv);
        let gap = cv - self.f.eval(av);
        let interaction = half * gap * gap;
        Ok(LagrangianDensities {
            free,
            interaction,
            total: free + interaction,
        })
    }

    fn node_terms(
        &self,
        c: &ClassicalField<T>,
        a: &ClassicalField<T>,
        lattice: Option<&Lattice<T>>,
    ) -> Result<(Lattice<T>, Vec<Vec<NodeTerms<T>>>)> {
        self.validate()?;
        c.validate()?;
        a.validate()?;
        let lat = match (c, lattice) {
            (ClassicalField::Grid(g), None) => g.lattice(),
            (ClassicalField::Grid(g), Some(l)) if g.lattice() == *l => *l,
            (ClassicalField::Grid(_), Some(_)) => {
                return Err(Error::domain("evaluation lattice differs from the lattice of the grid field C"))
            }
            (_, Some(l)) => *l,
            (_, None) => return Err(Error::domain("closed-form C needs an evaluation lattice")),
        };
        lat.validate()?;
        lat.check_interior(4)?;
        let m2 = self.m_c * self.m_c;
        let rows = (1..lat.nt - 1)
            .into_par_iter()
            .map(|i| {
                (1..lat.nx - 1)
                    .map(|j| {
                        let x = lat.point(i, j);
                        let (cv, boxed) = match c {
                            ClassicalField::Grid(g) => (g.get(i, j), g.box_at_node(i, j)),
                            _ => (c.value(x)?, c.box_exact(x).expect("closed form")),
                        };
                        let av = a.value(x)?;
                        Ok(NodeTerms {
                            c: cv,
                            constraint: cv - self.f.eval(av),
                            free: boxed + m2 * cv,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((lat, rows))
    }

    /// `Z_C^{1/2}(□C + m_C² C) - (C - F(A))` on the interior nodes.
    ///
    /// A grid `C` is evaluated on its own lattice with central differences;
    /// a closed-form `C` needs `lattice` and is differentiated exactly.
    pub fn euler_lagrange_residual(
        &self,
        c: &ClassicalField<T>,
        a: &ClassicalField<T>,
        lattice: Option<&Lattice<T>>,
    ) -> Result<GridField<T>> {
        let (lat, rows) = self.node_terms(c, a, lattice)?;
        let sz = self.z_c.sqrt();
        let values = rows
            .into_iter()
            .map(|row| row.into_iter().map(|n| sz * n.free - n.constraint).collect())
            .collect();
        GridField::new(lat.interior(), values)
    }

    /// If `C = F(A)` and `Z_C ≠ 0`, then `C` must solve `□C + m_C² C = 0`.
    /// Refuses `Z_C = 0`.
    pub fn free_field_check(
        &self,
        c: &ClassicalField<T>,
        a: &ClassicalField<T>,
        lattice: Option<&Lattice<T>>,
        tol: T,
    ) -> Result<FreeFieldVerdict<T>> {
        if !(tol.is_finite() && tol > T::zero()) {
            return Err(Error::validation("tolerance must be finite and > 0"));
        }
        self.validate()?;
        if self.z_c == T::zero() {
            return Err(Error::Refused(ZERO_Z_REPORT.into()));
        }
        let (_, rows) = self.node_terms(c, a, lattice)?;
        let sz = self.z_c.sqrt();
        let (mut con, mut free, mut el, mut cmax) = (T::zero(), T::zero(), T::zero(), T::zero());
        for n in rows.iter().flatten() {
            con = con.max(n.constraint.abs());
            free = free.max(n.free.abs());
            el = el.max((sz * n.free - n.constraint).abs());
            cmax = cmax.max(n.c.abs());
        }
        let scale = T::one().max(self.m_c * self.m_c * cmax);
        let constraint_holds = con < tol;
        Ok(FreeFieldVerdict {
            constraint_residual: con,
            free_residual: free,
            el_residual: el,
            scale,
            tol,
            constraint_holds,
            consistent: !constraint_holds || free < tol * scale,
        })
    }
}
