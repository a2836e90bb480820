//! Scenario documents and input resolution.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use klspec::composite::{ClassicalField, GridField};
use klspec::quad::Tolerance;

use crate::error::CliError;

pub const SCENARIO_SCHEMA: &str = "klspec/scenario/v1";
pub const SUMMARY_SCHEMA: &str = "klspec/summary/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Kind {
    Decompose,
    TotalMass,
    Etcr,
    Classify,
    KernelEval,
    ScalingSweep,
    GaussCharge,
    GaussVariance,
    CompositeResidual,
    Prop61,
}

impl Kind {
    pub const ALL: [Kind; 10] = [
        Kind::Decompose,
        Kind::TotalMass,
        Kind::Etcr,
        Kind::Classify,
        Kind::KernelEval,
        Kind::ScalingSweep,
        Kind::GaussCharge,
        Kind::GaussVariance,
        Kind::CompositeResidual,
        Kind::Prop61,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Decompose => "decompose",
            Kind::TotalMass => "totalMass",
            Kind::Etcr => "etcr",
            Kind::Classify => "classify",
            Kind::KernelEval => "kernelEval",
            Kind::ScalingSweep => "scalingSweep",
            Kind::GaussCharge => "gaussCharge",
            Kind::GaussVariance => "gaussVariance",
            Kind::CompositeResidual => "compositeResidual",
            Kind::Prop61 => "prop61",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub rel: Option<f64>,
    pub abs: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    #[serde(default)]
    pub kind: Option<Kind>,
    #[serde(default)]
    pub inputs: Map<String, Value>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read scenario {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| CliError::Validation(format!("scenario: {e}")))?;
        if s.schema != SCENARIO_SCHEMA {
            return Err(CliError::Validation(format!(
                "scenario schema {:?} is not {SCENARIO_SCHEMA:?}",
                s.schema
            )));
        }
        Ok(s)
    }

    /// Quadrature tolerance, with `rel_override` (from `--tol`) taking precedence.
    pub fn tolerance(&self, rel_override: Option<f64>) -> Result<Tolerance<f64>, CliError> {
        let d = Tolerance::<f64>::default();
        let rel = rel_override.or(self.tolerances.rel).unwrap_or(d.rel);
        let abs = self.tolerances.abs.unwrap_or(d.abs);
        for (name, v) in [("rel", rel), ("abs", abs)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Validation(format!("tolerance {name} must be finite and > 0, got {v}")));
            }
        }
        Ok(Tolerance::new(rel, abs))
    }
}

/// Scenario inputs; a value `{"path": "..."}` refers to a file relative to
/// the scenario's directory.
pub struct Inputs<'a> {
    map: &'a Map<String, Value>,
    base: PathBuf,
}

impl<'a> Inputs<'a> {
    pub fn new(map: &'a Map<String, Value>, base: impl Into<PathBuf>) -> Self {
        Inputs { map, base: base.into() }
    }

    fn reference(v: &Value) -> Option<&str> {
        match v {
            Value::Object(o) if o.len() == 1 => o.get("path").and_then(Value::as_str),
            _ => None,
        }
    }

    fn resolve(&self, key: &str, v: &Value) -> Result<Value, CliError> {
        match Self::reference(v) {
            Some(p) => {
                let path = self.base.join(p);
                let text = fs::read_to_string(&path)
                    .map_err(|e| CliError::Validation(format!("{key}: cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Validation(format!("{key}: {}: {e}", path.display())))
            }
            None => Ok(v.clone()),
        }
    }

    pub fn opt<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => {
                let v = self.resolve(key, v)?;
                serde_json::from_value(v)
                    .map(Some)
                    .map_err(|e| CliError::Validation(format!("{key}: {e}")))
            }
        }
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<T, CliError> {
        self.opt(key)?
            .ok_or_else(|| CliError::Validation(format!("missing input {key:?}")))
    }

    /// A classical field; `.csv` references load a `t,x,value` grid.
    pub fn field(&self, key: &str) -> Result<ClassicalField<f64>, CliError> {
        let v = self
            .map
            .get(key)
            .ok_or_else(|| CliError::Validation(format!("missing input {key:?}")))?;
        if let Some(p) = Self::reference(v) {
            if p.ends_with(".csv") {
                let path = self.base.join(p);
                let file = fs::File::open(&path)
                    .map_err(|e| CliError::Validation(format!("{key}: cannot read {}: {e}", path.display())))?;
                let grid = GridField::read_csv(file).map_err(|e| CliError::Validation(format!("{key}: {e}")))?;
                return Ok(ClassicalField::Grid(grid));
            }
        }
        self.get(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_is_checked() {
        let err = Scenario::parse(r#"{"schema": "klspec/scenario/v0"}"#).unwrap_err();
        assert!(matches!(err, CliError::Validation(_)));
        assert!(Scenario::parse(r#"{"schema": "klspec/scenario/v1", "bogus": 1}"#).is_err());
        let s = Scenario::parse(r#"{"schema": "klspec/scenario/v1", "kind": "scalingSweep"}"#).unwrap();
        assert_eq!(s.kind, Some(Kind::ScalingSweep));
    }

    #[test]
    fn tolerance_override_and_bounds() {
        let s = Scenario::parse(r#"{"schema": "klspec/scenario/v1", "tolerances": {"rel": 1e-6}}"#).unwrap();
        assert_eq!(s.tolerance(None).unwrap().rel, 1e-6);
        assert_eq!(s.tolerance(Some(1e-9)).unwrap().rel, 1e-9);
        assert!(s.tolerance(Some(0.0)).is_err());
        assert!(s.tolerance(Some(f64::NAN)).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in Kind::ALL {
            let v = serde_json::to_value(k).unwrap();
            assert_eq!(v, Value::String(k.name().into()));
            assert_eq!(serde_json::from_value::<Kind>(v).unwrap(), k);
        }
    }

    #[test]
    fn path_references_resolve_against_base() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("sigma.json"), "[1.0, 2.0]").unwrap();
        let map: Map<String, Value> = serde_json::from_str(r#"{"sigma": {"path": "sigma.json"}}"#).unwrap();
        let inputs = Inputs::new(&map, dir.path());
        assert_eq!(inputs.get::<Vec<f64>>("sigma").unwrap(), vec![1.0, 2.0]);
        assert!(inputs.opt::<f64>("missing").unwrap().is_none());
        assert!(matches!(inputs.get::<f64>("missing"), Err(CliError::Validation(_))));
    }
}
