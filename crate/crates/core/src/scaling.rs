//! Scaling-degree estimates from λ-sweeps of the scaled pairing.
//!
//! The estimate is the negated least-squares slope of `ln |W₊,λ(f)|`
//! against `ln λ`. A free field gives 2.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{scaled_w, KernelValue, MomentumTestFunction};
use crate::measures::SpectralMeasure;
use crate::quad::Tolerance;
use crate::scalar::Real;

/// Scaling degree of the free two-point function.
pub const FREE_SCALING_DEGREE: f64 = 2.0;
pub const DEFAULT_MARGIN: f64 = 0.2;
pub const DEFAULT_RESIDUAL_THRESHOLD: f64 = 0.05;
/// Minimum ratio between the largest and smallest scale of a sweep.
pub const MIN_SPAN: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Verdict {
    AtMostFree,
    StrictlyMoreSingular,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingOptions<T> {
    pub margin: T,
    /// RMS of the log-log fit residuals above which no verdict is given.
    pub residual_threshold: T,
    pub tol: Tolerance<T>,
}

impl<T: Real> Default for ScalingOptions<T> {
    fn default() -> Self {
        ScalingOptions {
            margin: T::lit(DEFAULT_MARGIN),
            residual_threshold: T::lit(DEFAULT_RESIDUAL_THRESHOLD),
            tol: Tolerance::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", bound(serialize = "T: Real + Serialize"))]
pub struct ScalingReport<T: Real> {
    pub lambdas: Vec<T>,
    pub values: Vec<T>,
    pub errors: Vec<T>,
    /// Present whenever every value is finite and nonzero.
    pub sd_estimate: Option<T>,
    /// `+∞` when no fit was possible.
    pub fit_residual: T,
    pub margin: T,
    pub residual_threshold: T,
    pub verdict: Verdict,
}

impl<T: Real> ScalingReport<T> {
    /// Fits an already computed sweep.
    pub fn from_values(lambdas: &[T], values: &[T], errors: &[T], opts: &ScalingOptions<T>) -> Result<Self> {
        check_grid(lambdas)?;
        if values.len() != lambdas.len() || errors.len() != lambdas.len() {
            return Err(Error::validation("scaling report: lambdas, values and errors differ in length"));
        }
        if !(opts.margin >= T::zero() && opts.residual_threshold > T::zero()) {
            return Err(Error::validation(
                "scaling options: margin must be >= 0 and residual threshold > 0",
            ));
        }
        let fit = fit_log_log(lambdas, values);
        let (sd_estimate, fit_residual) = match fit {
            Some((slope, residual)) => (Some(-slope), residual),
            None => (None, T::infinity()),
        };
        let verdict = match sd_estimate {
            Some(sd) if fit_residual <= opts.residual_threshold => {
                if sd > T::lit(FREE_SCALING_DEGREE) + opts.margin {
                    Verdict::StrictlyMoreSingular
                } else {
                    Verdict::AtMostFree
                }
            }
            _ => Verdict::Inconclusive,
        };
        Ok(ScalingReport {
            lambdas: lambdas.to_vec(),
            values: values.to_vec(),
            errors: errors.to_vec(),
            sd_estimate,
            fit_residual,
            margin: opts.margin,
            residual_threshold: opts.residual_threshold,
            verdict,
        })
    }
}

/// Least-squares slope of `ln|y|` against `ln x` and the RMS residual.
/// `None` if any value is zero or not finite.
pub fn fit_log_log<T: Real>(xs: &[T], ys: &[T]) -> Option<(T, T)> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    if ys.iter().any(|y| !y.is_finite() || *y == T::zero()) {
        return None;
    }
    let lx: Vec<T> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<T> = ys.iter().map(|y| y.abs().ln()).collect();
    let n = T::from_usize_lossy(xs.len());
    let mx = lx.iter().copied().sum::<T>() / n;
    let my = ly.iter().copied().sum::<T>() / n;
    let sxx: T = lx.iter().map(|x| (*x - mx) * (*x - mx)).sum();
    let sxy: T = lx.iter().zip(&ly).map(|(x, y)| (*x - mx) * (*y - my)).sum();
    if sxx == T::zero() {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: T = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = *y - (intercept + slope * *x);
            r * r
        })
        .sum();
    Some((slope, (ss / n).sqrt()))
}

/// At least four strictly decreasing scales in `(0, 1]` spanning two decades.
pub fn check_grid<T: Real>(lambdas: &[T]) -> Result<()> {
    if lambdas.len() < 4 {
        return Err(Error::validation(format!(
            "scaling sweep needs at least 4 lambdas, got {}",
            lambdas.len()
        )));
    }
    if lambdas.iter().any(|l| !(l.is_finite() && *l > T::zero() && *l <= T::one())) {
        return Err(Error::validation("scaling sweep: every lambda must lie in (0, 1]"));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::validation("scaling sweep: lambdas must be strictly decreasing"));
    }
    let span = lambdas[0] / lambdas[lambdas.len() - 1];
    if span < T::lit(MIN_SPAN) {
        return Err(Error::validation(format!(
            "scaling sweep must span at least two decades, got a ratio of {span}"
        )));
    }
    Ok(())
}

/// `λ = 2^0, 2^-1, ..., 2^-(n-1)`.
pub fn dyadic_grid<T: Real>(n: usize) -> Vec<T> {
    (0..n).map(|k| T::lit(0.5).powi(k as i32)).collect()
}

fn sweep<T, G>(lambdas: &[T], eval: G) -> Result<(Vec<T>, Vec<T>)>
where
    T: Real,
    G: Fn(T) -> Result<KernelValue<T>> + Sync,
{
    let results: Vec<Result<KernelValue<T>>> = lambdas.par_iter().map(|&l| eval(l)).collect();
    let mut values = Vec::with_capacity(lambdas.len());
    let mut errors = Vec::with_capacity(lambdas.len());
    for (l, r) in lambdas.iter().zip(results) {
        match r {
            Ok(kv) => {
                values.push(kv.value);
                errors.push(kv.quadrature_error);
            }
            Err(e) => {
                return Err(Error::SweepFailed {
                    lambda: l.as_f64(),
                    completed: lambdas
                        .iter()
                        .zip(&values)
                        .map(|(l, v)| (l.as_f64(), v.as_f64()))
                        .collect(),
                    source: Box::new(e),
                })
            }
        }
    }
    Ok((values, errors))
}

/// Sweeps `W₊,λ(f)` over `lambdas` and fits the scaling degree.
pub fn estimate_scaling_degree<T, F>(
    measure: &SpectralMeasure<T>,
    f: &F,
    lambdas: &[T],
    opts: &ScalingOptions<T>,
) -> Result<ScalingReport<T>>
where
    T: Real,
    F: MomentumTestFunction<T> + ?Sized,
{
    check_grid(lambdas)?;
    let (values, errors) = sweep(lambdas, |l| scaled_w(measure, f, l, &opts.tol))?;
    ScalingReport::from_values(lambdas, &values, &errors, opts)
}

/// Like [`estimate_scaling_degree`], but at each scale the measure is cut
/// off at `Λ² = cutoff_scale / λ²`. Realizes the sweep of a measure whose
/// total mass diverges through a sequence of finite measures.
pub fn estimate_scaling_degree_with_cutoff<T, F>(
    measure: &SpectralMeasure<T>,
    f: &F,
    lambdas: &[T],
    cutoff_scale: T,
    opts: &ScalingOptions<T>,
) -> Result<ScalingReport<T>>
where
    T: Real,
    F: MomentumTestFunction<T> + ?Sized,
{
    check_grid(lambdas)?;
    if !(cutoff_scale.is_finite() && cutoff_scale > T::zero()) {
        return Err(Error::validation("cutoff scale must be finite and > 0"));
    }
    let (values, errors) = sweep(lambdas, |l| {
        // Atoms above the running cutoff are dropped from that member of the sequence.
        let cut = cutoff_scale / (l * l);
        let kept = SpectralMeasure::new(
            measure.channel(),
            measure.atoms().iter().copied().filter(|a| a.mass2 <= cut).collect(),
            measure.density().clone(),
            Some(cut),
            measure.witness(),
        )?;
        scaled_w(&kept, f, l, &opts.tol)
    })?;
    ScalingReport::from_values(lambdas, &values, &errors, opts)
}

/// True iff the report shows a scaling degree above the free value.
pub fn singularity_verdict<T: Real>(report: &ScalingReport<T>) -> Result<bool> {
    match report.verdict {
        Verdict::Inconclusive => Err(Error::Inconclusive {
            residual: report.fit_residual.as_f64(),
            threshold: report.residual_threshold.as_f64(),
        }),
        v => Ok(v == Verdict::StrictlyMoreSingular),
    }
}
