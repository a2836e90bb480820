//! Scenario execution: one function per kind, each returning a summary
//! record and a table.

use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Value};

use klspec::composite::{decay_threshold, CompositeModel, Lattice};
use klspec::gauss::{self, ChargeFunction, FieldConfiguration, LimitOptions, ProbeFunction};
use klspec::kernels::{self, TestFunction};
use klspec::measures::{etcr_z, Channel, Extended, SpectralMeasure};
use klspec::quad::Tolerance;
use klspec::scaling::{self, ScalingOptions};

use crate::error::CliError;
use crate::scenario::{Inputs, Kind, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    /// `quantity,value` rows from the scalar entries of a JSON object.
    fn from_scalars(v: &Value) -> Self {
        let mut t = Table::new(&["quantity", "value"]);
        if let Value::Object(map) = v {
            for (k, x) in map {
                let cell = match x {
                    Value::Number(n) => n.as_f64().map_or_else(|| n.to_string(), num),
                    Value::String(s) => s.clone(),
                    Value::Bool(b) => b.to_string(),
                    Value::Null => String::new(),
                    _ => continue,
                };
                t.push(vec![k.clone(), cell]);
            }
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub kind: Kind,
    pub tolerance: Tolerance<f64>,
    pub result: Value,
    pub table: Table,
}

/// Shortest round-trip form in exponent notation; `+inf`/`-inf`/`nan` spelled out.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "+inf".into() } else { "-inf".into() }
    } else {
        format!("{v:e}")
    }
}

fn ext(v: Extended<f64>) -> String {
    match v {
        Extended::Finite(x) => num(x),
        Extended::Infinite => "+inf".into(),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn measure(inputs: &Inputs, key: &str) -> Result<SpectralMeasure<f64>, CliError> {
    inputs.get(key)
}

pub fn run(kind: Kind, scenario: &Scenario, base: &Path, tol_override: Option<f64>) -> Result<Outcome, CliError> {
    if let Some(k) = scenario.kind {
        if k != kind {
            return Err(CliError::Validation(format!(
                "scenario declares kind {k} but was run as {kind}"
            )));
        }
    }
    let tol = scenario.tolerance(tol_override)?;
    let inputs = Inputs::new(&scenario.inputs, base);
    let (result, table) = match kind {
        Kind::Decompose => decompose(&inputs)?,
        Kind::TotalMass => total_mass(&inputs, &tol)?,
        Kind::Etcr => etcr(&inputs)?,
        Kind::Classify => classify(&inputs)?,
        Kind::KernelEval => kernel_eval(&inputs, &tol)?,
        Kind::ScalingSweep => scaling_sweep(&inputs, &tol)?,
        Kind::GaussCharge => gauss_charge(&inputs, &tol)?,
        Kind::GaussVariance => gauss_variance(&inputs, &tol)?,
        Kind::CompositeResidual => composite_residual(&inputs)?,
        Kind::Prop61 => prop61(&inputs)?,
    };
    Ok(Outcome {
        kind,
        tolerance: tol,
        result,
        table,
    })
}

fn decompose(inputs: &Inputs) -> Result<(Value, Table), CliError> {
    let m = measure(inputs, "measure")?;
    let target: f64 = inputs.get("targetMass2")?;
    let (z, sigma) = m.decompose(target)?;
    let report = m.renormalization_report(target)?;
    let mut t = Table::new(&["role", "mass2", "weight"]);
    if z > 0.0 {
        t.push(vec!["extracted".into(), num(target), num(z)]);
    }
    for a in sigma.atoms() {
        t.push(vec!["remaining".into(), num(a.mass2), num(a.weight)]);
    }
    let result = json!({
        "z": z,
        "targetMass2": target,
        "sigmaTotal": to_json(&report.sigma_total),
        "rhoTotal": to_json(&report.rho_total),
        "etcrConsistent": report.etcr_consistent,
        "zBoundSatisfied": report.z_bound_satisfied,
        "remainder": to_json(&sigma),
    });
    Ok((result, t))
}

fn total_mass(inputs: &Inputs, tol: &Tolerance<f64>) -> Result<(Value, Table), CliError> {
    let m = measure(inputs, "measure")?;
    let up_to: Vec<f64> = inputs.opt("upTo")?.unwrap_or_default();
    let mut t = Table::new(&["upTo", "totalMass", "quadratureError"]);
    let mut partial = Vec::new();
    for &l in &up_to {
        let (v, e) = m.total_mass_estimate(Some(l), tol)?;
        t.push(vec![num(l), ext(v), num(e)]);
        partial.push(json!({"upTo": l, "totalMass": to_json(&v)}));
    }
    let (v, e) = m.total_mass_estimate(None, tol)?;
    t.push(vec!["+inf".into(), ext(v), num(e)]);
    let result = json!({
        "totalMass": to_json(&v),
        "quadratureError": e,
        "partial": partial,
    });
    Ok((result, t))
}

fn etcr(inputs: &Inputs) -> Result<(Value, Table), CliError> {
    let sigmas: Option<Vec<f64>> = inputs.opt("sigma")?;
    let m: Option<SpectralMeasure<f64>> = inputs.opt("measure")?;
    if sigmas.is_none() && m.is_none() {
        return Err(CliError::Validation("etcr needs \"sigma\" values or a \"measure\"".into()));
    }
    let mut t = Table::new(&["sigma", "z"]);
    let mut zs = Vec::new();
    for &s in sigmas.iter().flatten() {
        let z = etcr_z(s)?;
        t.push(vec![num(s), num(z)]);
        zs.push(json!({"sigma": s, "z": z}));
    }
    let report = match &m {
        Some(m) => {
            let target: f64 = inputs.get("targetMass2")?;
            to_json(&m.renormalization_report(target)?)
        }
        None => Value::Null,
    };
    Ok((json!({"etcrZ": zs, "report": report}), t))
}

fn classify(inputs: &Inputs) -> Result<(Value, Table), CliError> {
    let m = measure(inputs, "measure")?;
    let target: f64 = inputs.get("targetMass2")?;
    let etcr_assumed: bool = inputs.opt("etcrAssumed")?.unwrap_or(false);
    let c = to_json(&m.classify(target, etcr_assumed)?);
    let t = Table::from_scalars(&c);
    Ok((c, t))
}

fn kernel_eval(inputs: &Inputs, tol: &Tolerance<f64>) -> Result<(Value, Table), CliError> {
    let m = measure(inputs, "measure")?;
    let positions: Option<Vec<f64>> = inputs.opt("positions")?;
    let f: Option<TestFunction<f64>> = inputs.opt("testFunction")?;
    if positions.is_none() && f.is_none() {
        return Err(CliError::Validation(
            "kernelEval needs \"positions\" or a \"testFunction\"".into(),
        ));
    }
    let mut t = Table::new(&["r", "value", "quadratureError"]);
    let mut pos = Vec::new();
    for &r in positions.iter().flatten() {
        let v = kernels::kl_spacelike(&m, r, tol)?;
        t.push(vec![num(r), num(v.value), num(v.quadrature_error)]);
        pos.push(json!({"r": r, "value": v.value, "quadratureError": v.quadrature_error}));
    }
    let smeared = match &f {
        None => Value::Null,
        Some(f) => match m.channel() {
            Channel::PhotonFieldStrength => {
                let [mu, nu]: [usize; 2] = inputs.get("indices")?;
                to_json(&kernels::photon_kernel_smeared(&m, mu, nu, f, tol)?)
            }
            _ => to_json(&kernels::smeared_w(&m, f, tol)?),
        },
    };
    Ok((json!({"positions": pos, "smeared": smeared}), t))
}

fn default_test_function() -> TestFunction<f64> {
    TestFunction::isotropic(1.0, 1.0, 1.0).expect("valid")
}

fn scaling_sweep(inputs: &Inputs, tol: &Tolerance<f64>) -> Result<(Value, Table), CliError> {
    let m = measure(inputs, "measure")?;
    let f = inputs.opt("testFunction")?.unwrap_or_else(default_test_function);
    let lambdas: Vec<f64> = inputs.opt("lambdas")?.unwrap_or_else(|| scaling::dyadic_grid(8));
    let d = ScalingOptions::<f64>::default();
    let opts = ScalingOptions {
        margin: inputs.opt("margin")?.unwrap_or(d.margin),
        residual_threshold: inputs.opt("residualThreshold")?.unwrap_or(d.residual_threshold),
        tol: *tol,
    };
    let cutoff_scale: Option<f64> = inputs.opt("cutoffScale")?;
    let report = match cutoff_scale {
        Some(c) => scaling::estimate_scaling_degree_with_cutoff(&m, &f, &lambdas, c, &opts)?,
        None => scaling::estimate_scaling_degree(&m, &f, &lambdas, &opts)?,
    };
    let mut t = Table::new(&["lambda", "value", "quadratureError"]);
    for i in 0..report.lambdas.len() {
        t.push(vec![num(report.lambdas[i]), num(report.values[i]), num(report.errors[i])]);
    }
    let mut result = to_json(&report);
    if let Some(target) = inputs.opt::<f64>("targetMass2")? {
        let (z, _) = m.decompose(target)?;
        result["z"] = json!(z);
    }
    result["cutoffScale"] = json!(cutoff_scale);
    Ok((result, t))
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LimitInput {
    rel: Option<f64>,
    abs: Option<f64>,
}

fn default_rgrid() -> Vec<f64> {
    (1..=10).map(|k| 2.0 * k as f64).collect()
}

fn gauss_charge(inputs: &Inputs, tol: &Tolerance<f64>) -> Result<(Value, Table), CliError> {
    let config: FieldConfiguration<f64> = inputs.get("configuration")?;
    let chi: ChargeFunction<f64> = inputs.get("chargeFunction")?;
    let rgrid: Vec<f64> = inputs.opt("rgrid")?.unwrap_or_else(default_rgrid);
    let l: LimitInput = inputs.opt("limit")?.unwrap_or_default();
    let d = LimitOptions::<f64>::default();
    let opts = LimitOptions {
        rel: l.rel.unwrap_or(d.rel),
        abs: l.abs.unwrap_or(d.abs),
        tol: *tol,
    };
    let est = gauss::extract_charge(&config, &chi, &rgrid, &opts)?;
    let mut t = Table::new(&["component", "R", "value"]);
    for (i, c) in est.components.iter().enumerate() {
        for (r, v) in c.rgrid.iter().zip(&c.sequence) {
            t.push(vec![format!("f{}0", i + 1), num(*r), num(*v)]);
        }
    }
    Ok((to_json(&est), t))
}

fn gauss_variance(inputs: &Inputs, tol: &Tolerance<f64>) -> Result<(Value, Table), CliError> {
    let m = measure(inputs, "measure")?;
    let probe: ProbeFunction<f64> = inputs.get("probe")?;
    probe.validate()?;
    let [mu, nu]: [usize; 2] = inputs.opt("indices")?.unwrap_or([1, 0]);
    let rgrid: Vec<f64> = inputs.opt("rgrid")?.unwrap_or_else(default_rgrid);
    let values = gauss::vacuum_variance(&m, &probe, (mu, nu), &rgrid, tol)?;
    let mut t = Table::new(&["R", "value", "quadratureError"]);
    for (r, v) in rgrid.iter().zip(&values) {
        t.push(vec![num(*r), num(v.value), num(v.quadrature_error)]);
    }
    // Bounded: no term exceeds twice the largest value over the first decade.
    let first_decade = rgrid[0] * 10.0;
    let first_max = rgrid
        .iter()
        .zip(&values)
        .filter(|(r, _)| **r <= first_decade)
        .fold(0.0f64, |a, (_, v)| a.max(v.value));
    let max = values.iter().fold(0.0f64, |a, v| a.max(v.value));
    let result = json!({
        "rgrid": rgrid,
        "values": values.iter().map(|v| v.value).collect::<Vec<_>>(),
        "quadratureErrors": values.iter().map(|v| v.quadrature_error).collect::<Vec<_>>(),
        "firstDecadeMax": first_max,
        "max": max,
        "bounded": max <= 2.0 * first_max,
    });
    Ok((result, t))
}

fn composite_inputs(
    inputs: &Inputs,
) -> Result<(CompositeModel<f64>, klspec::ClassicalField, klspec::ClassicalField, Option<Lattice<f64>>), CliError> {
    let model: CompositeModel<f64> = inputs.get("model")?;
    let c = inputs.field("c")?;
    let a = inputs.field("a")?;
    let lattice: Option<Lattice<f64>> = inputs.opt("lattice")?;
    Ok((model, c, a, lattice))
}

fn composite_residual(inputs: &Inputs) -> Result<(Value, Table), CliError> {
    let (model, c, a, lattice) = composite_inputs(inputs)?;
    let r = model.euler_lagrange_residual(&c, &a, lattice.as_ref())?;
    let lat = r.lattice();
    let mut t = Table::new(&["t", "x", "residual"]);
    let mut max = 0.0f64;
    for (i, row) in r.values.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            t.push(vec![num(lat.t(i)), num(lat.x(j)), num(*v)]);
            max = max.max(v.abs());
        }
    }
    let result = json!({
        "maxAbsResidual": max,
        "interior": {"t0": lat.t0, "x0": lat.x0, "dt": lat.dt, "dx": lat.dx, "nt": lat.nt, "nx": lat.nx},
        "decayThreshold": decay_threshold(model.m_c, model.m)?,
    });
    Ok((result, t))
}

fn prop61(inputs: &Inputs) -> Result<(Value, Table), CliError> {
    let (model, c, a, lattice) = composite_inputs(inputs)?;
    let tol: f64 = inputs.opt("tol")?.unwrap_or(1e-8);
    let v = to_json(&model.free_field_check(&c, &a, lattice.as_ref(), tol)?);
    let t = Table::from_scalars(&v);
    Ok((v, t))
}
