//! The run configuration shared by every command.

use hypokernel::funcspace::GaussPolyJson;
use hypokernel::{
    Error, FractionalParams, GaussPoly, KernelForm, ModelSpec, QuadratureConfig, Result, SpaceTimeGaussPoly,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractionalConfig {
    pub s: f64,
}

/// One evaluation point; which coordinates are needed depends on the task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
}

/// Parsed strictly: unknown keys anywhere are rejected. Matrices are
/// row-major arrays of arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fractional: Option<FractionalConfig>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    /// Spatial test function; e^{−|X|²} when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<GaussPolyJson>,
    /// One-variable factor h, making the space-time input u(X, t) = f(X)h(t).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_factor: Option<GaussPolyJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_form: Option<KernelForm>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<PointConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub z_grid: Vec<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Invalid(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.model.dim();
        self.quadrature.validate()?;
        if let Some(f) = &self.fractional {
            FractionalParams::new(f.s)?;
        }
        if self.function.is_some() {
            let f = self.space_function()?;
            if f.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, got: f.dim() });
            }
        }
        if let Some(h) = &self.time_factor {
            let h = GaussPoly::try_from(h)?;
            if h.dim() != 1 {
                return Err(Error::DimensionMismatch { expected: 1, got: h.dim() });
            }
        }
        for (i, p) in self.points.iter().enumerate() {
            let bad = p.x.len() != n || p.y.as_ref().is_some_and(|y| y.len() != n);
            if bad {
                return Err(Error::Invalid(format!("point {i}: coordinates must have length {n}")));
            }
            let finite = p.x.iter().chain(p.y.iter().flatten()).chain(&p.t).chain(&p.z).all(|v| v.is_finite());
            if !finite {
                return Err(Error::Invalid(format!("point {i}: coordinates must be finite")));
            }
        }
        if self.z_grid.iter().any(|z| !(*z > 0.0) || !z.is_finite()) {
            return Err(Error::Invalid("z_grid values must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn space_function(&self) -> Result<GaussPoly> {
        match &self.function {
            Some(f) => GaussPoly::try_from(f),
            None => GaussPoly::isotropic(vec![0.0; self.model.dim()], 1.0),
        }
    }

    pub fn space_time_function(&self) -> Result<SpaceTimeGaussPoly> {
        let f = self.space_function()?;
        match &self.time_factor {
            Some(h) => SpaceTimeGaussPoly::from_tensor(&f, &GaussPoly::try_from(h)?),
            None => Ok(SpaceTimeGaussPoly::stationary(f)),
        }
    }

    pub fn order(&self) -> Option<f64> {
        self.fractional.map(|f| f.s)
    }

    pub fn form(&self) -> KernelForm {
        self.kernel_form.unwrap_or(KernelForm::K)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"{
        "model": {"q": [[1.0, 0.0], [0.0, 0.0]], "b": [[0.0, 0.0], [1.0, 0.0]]},
        "fractional": {"s": 0.5},
        "quadrature": {"gh_nodes": 30},
        "function": {"center": [0.1, 0.0], "shape": [[1.0, 0.0], [0.0, 2.0]],
                     "terms": [{"powers": [1, 0], "coeff": 0.5}]},
        "time_factor": {"center": [0.0], "shape": [[1.0]]},
        "kernel_form": "c",
        "points": [{"x": [0.1, 0.2], "y": [0.3, 0.4], "t": 0.5, "z": 0.25}],
        "z_grid": [0.2, 0.1]
    }"#;

    #[test]
    fn round_trip_is_identity() {
        let config = RunConfig::parse(FULL).unwrap();
        assert_eq!(config.quadrature.gh_nodes, 30);
        assert_eq!(config.quadrature.abs_tol, QuadratureConfig::default().abs_tol);
        let again = RunConfig::parse(&config.to_json()).unwrap();
        assert_eq!(again, config);
        assert_eq!(again.to_json(), config.to_json());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"model": {"q": [[1.0]], "b": [[0.0]]}, "extra": 1}"#;
        assert!(RunConfig::parse(text).is_err());
        let nested = r#"{"model": {"q": [[1.0]], "b": [[0.0]]}, "quadrature": {"nodes": 3}}"#;
        assert!(RunConfig::parse(nested).is_err());
    }

    #[test]
    fn validation() {
        let ragged = r#"{"model": {"q": [[1.0, 0.0], [0.0]], "b": [[0.0, 0.0], [1.0, 0.0]]}}"#;
        assert!(RunConfig::parse(ragged).is_err());
        let order = r#"{"model": {"q": [[1.0]], "b": [[0.0]]}, "fractional": {"s": 1.5}}"#;
        assert!(matches!(RunConfig::parse(order), Err(Error::Domain(_))));
        let point = r#"{"model": {"q": [[1.0]], "b": [[0.0]]}, "points": [{"x": [0.0, 1.0]}]}"#;
        assert!(RunConfig::parse(point).is_err());
    }
}
