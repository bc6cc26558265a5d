//! Flat run configuration using the dimensionless symbol names of the model
//! (`M`, `W_over_M`, `b_M_over_d`, `P0`, `dP`, `X0`, `T_final`, ...).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::Regime;
use crate::wavepacket::SolutionKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Rectangular,
    SmoothTanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Spectral,
    Oracle,
    Both,
}

/// `T_final` in units of the barrier width or of the free transit time
/// `1 / v0` across it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    #[default]
    Dimensionless,
    Transit,
}

fn klein_gordon() -> Regime {
    Regime::KleinGordon
}
fn momentum_points() -> usize {
    2001
}
fn snapshots() -> usize {
    21
}
fn one() -> usize {
    1
}
fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub shape: Shape,
    #[serde(default = "klein_gordon")]
    pub regime: Regime,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "W_over_M")]
    pub w_over_m: f64,
    #[serde(rename = "b_M_over_d", default, skip_serializing_if = "Option::is_none")]
    pub b_m_over_d: Option<f64>,
    #[serde(rename = "P0", default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    #[serde(rename = "E_over_W", default, skip_serializing_if = "Option::is_none")]
    pub e_over_w: Option<f64>,
    #[serde(rename = "dP")]
    pub dp: f64,
    #[serde(rename = "X0")]
    pub x0: f64,
    #[serde(rename = "T_final")]
    pub t_final: f64,
    #[serde(default)]
    pub time_unit: TimeUnit,
    pub kind: SolutionKind,
    #[serde(default)]
    pub method: Method,
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    #[serde(default = "momentum_points")]
    pub n_p: usize,
    #[serde(default = "snapshots")]
    pub n_snapshots: usize,
    /// Pole shift for a rectangular barrier on the divergent branch.
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "one")]
    pub n_cycles: usize,
    /// Oracle time step in units of the grid spacing.
    #[serde(default = "half")]
    pub dt_factor: f64,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
name = "demo"
shape = "smooth_tanh"
M = 20.0
W_over_M = 2.2361
b_M_over_d = 5.0
E_over_W = 0.5
dP = 2.0
X0 = -3.0
T_final = 10.0
kind = "causal_mre"
x_min = -10.0
x_max = 10.0
n_x = 1001
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = RunConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.regime, Regime::KleinGordon);
        assert_eq!(cfg.method, Method::Spectral);
        assert_eq!(cfg.n_p, 2001);
        assert_eq!(cfg.n_snapshots, 21);
        assert_eq!(cfg.b_m_over_d, Some(5.0));
        assert_eq!(cfg.p0, None);
    }

    #[test]
    fn round_trips() {
        let cfg = RunConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = format!("{SAMPLE}\nV0 = 3.0\n");
        assert!(matches!(RunConfig::from_toml(&text), Err(Error::Config(_))));
    }
}
