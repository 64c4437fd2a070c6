//! JSON experiment configuration.
//!
//! Every field is optional at the parsing stage; each command asks for what
//! it needs and reports the missing field by name. Unknown fields are
//! rejected everywhere.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::configspace::{
    random_map, Contraction, ContractionMethod, ContractionPair, PointConfiguration,
};
use crate::error::{Error, Result};
use crate::flow::ConvexFunctional;
use crate::gaussmix::EstimatorPolicy;

/// Points with optional weights (uniform if absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigSpec {
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

impl ConfigSpec {
    pub fn build(&self, field: &str) -> Result<PointConfiguration> {
        let dim = self.points.first().map_or(0, Vec::len);
        let r = match &self.weights {
            Some(w) => crate::configspace::validate_configuration(dim, &self.points, w),
            None => PointConfiguration::uniform(dim, &self.points),
        };
        r.map_err(|e| Error::Config(format!("{field}: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomContraction {
    pub method: ContractionMethod,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// An entropy order: a number or `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Order {
    Value(f64),
    Name(String),
}

impl Order {
    pub fn value(&self) -> Result<f64> {
        match self {
            Order::Value(v) => Ok(*v),
            Order::Name(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => {
                Ok(f64::INFINITY)
            }
            Order::Name(s) => Err(Error::Config(format!("orders: unknown order {s:?}"))),
        }
    }
}

/// Either explicit pairs `(xs[i], ys[i])` and a query point `x0`, or random
/// instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MintySpec {
    #[serde(default)]
    pub xs: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub ys: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub instances: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: Option<ConfigSpec>,
    pub target: Option<ConfigSpec>,
    /// Explicit 1-Lipschitz map applied to `source`.
    pub contraction: Option<Contraction>,
    pub random_contraction: Option<RandomContraction>,
    pub orders: Option<Vec<Order>>,
    /// Noise variances `s`.
    pub noises: Option<Vec<f64>>,
    pub t_points: Option<usize>,
    pub functional: Option<ConvexFunctional>,
    /// Points per time at which the smoothed divergence is sampled.
    pub divergence_points: Option<usize>,
    /// Smoothing variance `s0` of `X` for entropy-power experiments.
    pub bandwidth: Option<f64>,
    /// Row-major linear map for the Lipschitz-weighted inequality.
    pub map: Option<Vec<Vec<f64>>>,
    pub s_grid: Option<Vec<f64>>,
    pub beta_grid: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub max_iter: Option<usize>,
    pub minty: Option<MintySpec>,
    pub policy: Option<EstimatorPolicy>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn source(&self) -> Result<PointConfiguration> {
        self.source
            .as_ref()
            .ok_or_else(|| Error::Config("missing field `source`".into()))?
            .build("source")
    }

    /// Whether a target, map or random map is given.
    pub fn has_pair(&self) -> bool {
        self.target.is_some() || self.contraction.is_some() || self.random_contraction.is_some()
    }

    /// The contraction pair from `source` and exactly one of `target`,
    /// `contraction`, `random_contraction`.
    pub fn pair(&self, seed: u64) -> Result<ContractionPair> {
        let source = self.source()?;
        let given = [
            self.target.is_some(),
            self.contraction.is_some(),
            self.random_contraction.is_some(),
        ];
        match given.iter().filter(|g| **g).count() {
            0 => {
                return Err(Error::Config(
                    "one of `target`, `contraction`, `random_contraction` is required".into(),
                ))
            }
            1 => {}
            _ => {
                return Err(Error::Config(
                    "give only one of `target`, `contraction`, `random_contraction`".into(),
                ))
            }
        }
        if let Some(t) = &self.target {
            let target = t.build("target")?;
            return crate::configspace::make_contraction_pair(source, target)
                .map_err(|e| Error::Config(format!("target: {e}")));
        }
        let map = match (&self.contraction, &self.random_contraction) {
            (Some(c), _) => c.clone(),
            (_, Some(r)) => random_map(&source, r.method, r.seed.unwrap_or(seed)),
            _ => unreachable!("checked above"),
        };
        map.pair(&source)
            .map_err(|e| Error::Config(format!("contraction: {e}")))
    }

    pub fn orders(&self, default: &[f64]) -> Result<Vec<f64>> {
        match &self.orders {
            Some(o) => o.iter().map(Order::value).collect(),
            None => Ok(default.to_vec()),
        }
    }

    pub fn noises(&self, default: &[f64]) -> Vec<f64> {
        self.noises.clone().unwrap_or_else(|| default.to_vec())
    }

    /// The first noise variance, for commands that use one.
    pub fn noise(&self) -> Result<f64> {
        match &self.noises {
            None => Ok(1.0),
            Some(v) if v.len() == 1 => Ok(v[0]),
            Some(_) => Err(Error::Config(
                "`noises` must hold a single value for this command".into(),
            )),
        }
    }

    pub fn map(&self, dim: usize) -> Result<Option<DMatrix<f64>>> {
        let Some(rows) = &self.map else {
            return Ok(None);
        };
        if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Config(format!("map: expected a {dim}x{dim} matrix")));
        }
        Ok(Some(DMatrix::from_fn(dim, dim, |i, j| rows[i][j])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected() {
        let e = ExperimentConfig::from_json(r#"{"source": {"points": [[0]]}, "sigma": 1}"#)
            .unwrap_err();
        assert!(e.to_string().contains("sigma"), "{e}");
        let e =
            ExperimentConfig::from_json(r#"{"policy": {"mode": "auto", "grid": 3}}"#).unwrap_err();
        assert!(e.to_string().contains("grid"), "{e}");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = ExperimentConfig::from_json("{\n  \"seed\": 1,\n  oops\n}").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }

    #[test]
    fn pair_sources() {
        let c = ExperimentConfig::from_json(
            r#"{"source": {"points": [[-1], [1]]}, "contraction": {"kind": "scaling", "center": [0], "ratio": 0.5}}"#,
        )
        .unwrap();
        let p = c.pair(0).unwrap();
        assert_eq!(p.target().coords(), &[-0.5, 0.5]);
        let c = ExperimentConfig::from_json(
            r#"{"source": {"points": [[-1], [1]]}, "target": {"points": [[0], [3]]}}"#,
        )
        .unwrap();
        assert!(c.pair(0).is_err());
        let c = ExperimentConfig::from_json(
            r#"{"source": {"points": [[0, 0], [1, 2]]}, "random_contraction": {"method": "folding"}}"#,
        )
        .unwrap();
        assert_eq!(c.pair(3).unwrap(), c.pair(3).unwrap());
    }

    #[test]
    fn orders_accept_infinity() {
        let c = ExperimentConfig::from_json(r#"{"orders": [0.5, 2, "inf"]}"#).unwrap();
        assert_eq!(c.orders(&[]).unwrap(), vec![0.5, 2.0, f64::INFINITY]);
    }

    #[test]
    fn composed_maps_parse() {
        let c = ExperimentConfig::from_json(
            r#"{"source": {"points": [[-2, 0], [2, 1]]},
                "contraction": {"kind": "compose", "maps": [
                    {"kind": "fold", "normal": [1, 0], "offset": 0},
                    {"kind": "scaling", "center": [0, 0], "ratio": 0.5}]}}"#,
        )
        .unwrap();
        assert_eq!(
            c.pair(0).unwrap().target().coords(),
            &[-1.0, 0.0, -1.0, 0.5]
        );
        let back = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&back).unwrap(), c);
    }
}
