//! Scenario configuration: versioned JSON with system, reservoir and run
//! blocks. Loading validates every physical-positivity constraint with the
//! offending field in the message.

use lambda_dyn::linalg::c64;
use lambda_dyn::reservoir::{CutoffExponent, FormFactor};
use lambda_dyn::system::{DensityMatrix, SystemParams};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u32,
    pub system: SystemBlock,
    pub reservoir: ReservoirBlock,
    #[serde(default)]
    pub run: RunBlock,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub e0: f64,
    pub e: f64,
    pub sigma: f64,
    pub beta: f64,
    pub lambda: f64,
    /// Complex coupling asymmetry γ as [re, im]; defaults to symmetric 1.
    #[serde(default = "default_gamma")]
    pub gamma_coupling: [f64; 2],
}

fn default_gamma() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirBlock {
    /// Amplitude A of the radial profile.
    pub amplitude: f64,
    /// Radial power p = -1/2 + n.
    pub n: u32,
    /// Cutoff exponent m ∈ {1, 2}.
    pub m: u8,
    pub kappa0: f64,
    /// W = ∫|g1|² dΣ; defaults to the isotropic 4π.
    #[serde(default = "default_angular_weight")]
    pub angular_weight: f64,
}

fn default_angular_weight() -> f64 {
    4.0 * std::f64::consts::PI
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(default)]
    pub time_grid: TimeGridSpec,
    #[serde(default)]
    pub initial_state: InitialStateSpec,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeGridSpec {
    /// Geometric grid over [1e-2·t1, 50·t2] with 400 points.
    #[default]
    Auto,
    Geometric {
        t_min: f64,
        t_max: f64,
        points: usize,
    },
    Linear {
        t_min: f64,
        t_max: f64,
        points: usize,
    },
    Explicit {
        times: Vec<f64>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialStateSpec {
    /// "level1", "gibbs0" or "dark".
    Preset(String),
    /// Explicit matrix of [re, im] pairs, validated on use.
    Matrix { matrix: [[[f64; 2]; 3]; 3] },
}

impl Default for InitialStateSpec {
    fn default() -> Self {
        InitialStateSpec::Preset("level1".into())
    }
}

impl ScenarioConfig {
    /// The standard operating point (also the built-in default config).
    pub fn standard() -> Self {
        Self {
            schema: SCHEMA_VERSION,
            system: SystemBlock {
                e0: 1.0,
                e: 0.0,
                sigma: 1e-5,
                beta: 1.0,
                lambda: 0.05,
                gamma_coupling: [1.0, 0.0],
            },
            reservoir: ReservoirBlock {
                amplitude: 0.3,
                n: 0,
                m: 1,
                kappa0: 1.0,
                angular_weight: default_angular_weight(),
            },
            run: RunBlock::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let cfg: ScenarioConfig = serde_json::from_str(&text)
            .map_err(|e| format!("config {}: {e}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.schema != SCHEMA_VERSION {
            return Err(format!(
                "schema: expected version {SCHEMA_VERSION}, got {}",
                self.schema
            ));
        }
        let s = &self.system;
        if !(s.e0 - s.e > 0.0) {
            return Err(format!(
                "system.e0/system.e: gap Δ = E0 − E must be positive, got {}",
                s.e0 - s.e
            ));
        }
        if !(s.sigma >= 0.0) || !s.sigma.is_finite() {
            return Err(format!("system.sigma: must be ≥ 0, got {}", s.sigma));
        }
        if !(s.beta > 0.0) || !s.beta.is_finite() {
            return Err(format!("system.beta: must be positive, got {}", s.beta));
        }
        if !s.lambda.is_finite() {
            return Err("system.lambda: must be finite".into());
        }
        let r = &self.reservoir;
        if !(r.amplitude >= 0.0) || !r.amplitude.is_finite() {
            return Err(format!(
                "reservoir.amplitude: must be ≥ 0, got {}",
                r.amplitude
            ));
        }
        if r.m != 1 && r.m != 2 {
            return Err(format!("reservoir.m: must be 1 or 2, got {}", r.m));
        }
        if !(r.kappa0 > 0.0) || !r.kappa0.is_finite() {
            return Err(format!("reservoir.kappa0: must be positive, got {}", r.kappa0));
        }
        if !(r.angular_weight > 0.0) || !r.angular_weight.is_finite() {
            return Err(format!(
                "reservoir.angular_weight: must be positive, got {}",
                r.angular_weight
            ));
        }
        if let TimeGridSpec::Explicit { times } = &self.run.time_grid {
            if times.is_empty() {
                return Err("run.time_grid.times: must not be empty".into());
            }
        }
        if let InitialStateSpec::Preset(name) = &self.run.initial_state {
            if !["level1", "gibbs0", "dark"].contains(&name.as_str()) {
                return Err(format!(
                    "run.initial_state: unknown preset {name:?} \
                     (expected level1, gibbs0 or dark, or an explicit matrix)"
                ));
            }
        }
        Ok(())
    }

    pub fn system_params(&self) -> SystemParams {
        SystemParams {
            e0: self.system.e0,
            e: self.system.e,
            sigma: self.system.sigma,
            beta: self.system.beta,
            lambda: self.system.lambda,
            gamma_coupling: c64(self.system.gamma_coupling[0], self.system.gamma_coupling[1]),
        }
    }

    pub fn form_factor(&self) -> Result<FormFactor, String> {
        let m = CutoffExponent::try_from(self.reservoir.m)
            .map_err(|e| format!("reservoir.m: {e}"))?;
        FormFactor::new(
            self.reservoir.amplitude,
            self.reservoir.n,
            m,
            self.reservoir.kappa0,
            self.reservoir.angular_weight,
        )
        .map_err(|e| format!("reservoir: {e}"))
    }

    pub fn initial_state(&self) -> Result<DensityMatrix, String> {
        let params = self.system_params();
        match &self.run.initial_state {
            InitialStateSpec::Preset(name) => match name.as_str() {
                "level1" => Ok(DensityMatrix::level1()),
                "gibbs0" => Ok(lambda_dyn::system::gibbs_state(&params, 0.0)),
                "dark" => Ok(DensityMatrix::dark(params.gamma_coupling)),
                other => Err(format!("run.initial_state: unknown preset {other:?}")),
            },
            InitialStateSpec::Matrix { matrix } => {
                let raw = serde_json::to_string(matrix).expect("matrix serializes");
                let rho = DensityMatrix::from_json(&raw)
                    .map_err(|e| format!("run.initial_state.matrix: {e}"))?;
                // explicit matrices must be valid states
                DensityMatrix::new(*rho.matrix())
                    .map_err(|e| format!("run.initial_state.matrix: {e}"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_config_round_trips() {
        let cfg = ScenarioConfig::standard();
        cfg.validate().unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ScenarioConfig = serde_json::from_str(&text).unwrap();
        back.validate().unwrap();
        assert_eq!(back.system.lambda, cfg.system.lambda);
        assert_eq!(back.reservoir.amplitude, cfg.reservoir.amplitude);
    }

    #[test]
    fn rejects_bad_fields() {
        let mut cfg = ScenarioConfig::standard();
        cfg.schema = 2;
        assert!(cfg.validate().unwrap_err().contains("schema"));
        let mut cfg = ScenarioConfig::standard();
        cfg.system.beta = -1.0;
        assert!(cfg.validate().unwrap_err().contains("system.beta"));
        let mut cfg = ScenarioConfig::standard();
        cfg.reservoir.m = 3;
        assert!(cfg.validate().unwrap_err().contains("reservoir.m"));
        let mut cfg = ScenarioConfig::standard();
        cfg.run.initial_state = InitialStateSpec::Preset("bogus".into());
        assert!(cfg.validate().unwrap_err().contains("initial_state"));
    }

    #[test]
    fn presets_build_states() {
        let cfg = ScenarioConfig::standard();
        for preset in ["level1", "gibbs0", "dark"] {
            let mut c = cfg.clone();
            c.run.initial_state = InitialStateSpec::Preset(preset.into());
            let rho = c.initial_state().unwrap();
            assert!((rho.trace().re - 1.0).abs() < 1e-12);
        }
    }
}
