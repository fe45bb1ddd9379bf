//! Scenario configuration files.
//!
//! A scenario is a TOML document with one table per concern. Every key is
//! required and unknown keys are rejected. [`ScenarioConfig::reference`] holds the
//! reference experiment; `dump` writes any config back out in a form that
//! reloads to an identical value.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// seconds
    pub duration: f64,
    /// seconds
    pub dt: f64,
    pub seed: u64,
    /// Abort on the first envelope violation instead of clamping.
    pub strict: bool,
    /// Clamp margin as a fraction of `δ̄`.
    pub clamp_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSection {
    pub k_w: f64,
    pub gamma: f64,
}

/// Per-channel envelope parameters, ordered `[attitude, x, y, z]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeSection {
    pub xi0: [f64; 4],
    pub xi_inf: [f64; 4],
    pub ell: [f64; 4],
    pub delta_bar: [f64; 4],
    pub delta_under: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocitySection {
    /// rad/s
    pub bias_omega: [f64; 3],
    /// m/s
    pub bias_v: [f64; 3],
    pub sigma_omega: f64,
    pub sigma_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationSection {
    /// inertial-frame directions or landmark positions
    pub inertial: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub bias: Vec<[f64; 3]>,
    pub noise: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// true attitude, row-major
    pub r_true: [[f64; 3]; 3],
    pub p_true: [f64; 3],
    /// estimated attitude, row-major; projected onto SO(3) when the scenario is built
    pub r_hat: [[f64; 3]; 3],
    pub p_hat: [f64; 3],
    /// `[b̂_Ω; b̂_V]`
    pub b_hat: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub run: RunSection,
    pub gains: GainSection,
    pub envelope: EnvelopeSection,
    pub velocity: VelocitySection,
    pub vectors: ObservationSection,
    pub landmarks: ObservationSection,
    pub initial: InitialSection,
}

/// Clamp margin used by the reference scenario, as a fraction of `δ̄`.
pub const REFERENCE_CLAMP_MARGIN: f64 = 0.2;

impl ScenarioConfig {
    /// The reference experiment.
    pub fn reference() -> Self {
        let s3 = 3f64.sqrt();
        let xi0 = [1.3, 5.0, 6.0, 4.0];
        Self {
            run: RunSection {
                duration: 15.0,
                dt: 1e-3,
                seed: 0,
                strict: false,
                clamp_margin: REFERENCE_CLAMP_MARGIN,
            },
            gains: GainSection { k_w: 6.0, gamma: 1.0 },
            envelope: EnvelopeSection {
                xi0,
                xi_inf: [0.07, 0.3, 0.3, 0.3],
                ell: [4.0; 4],
                delta_bar: xi0,
                delta_under: xi0,
            },
            velocity: VelocitySection {
                bias_omega: [0.1, -0.1, 0.1],
                bias_v: [0.2, 0.5, 0.1],
                sigma_omega: 0.16,
                sigma_v: 0.25,
            },
            vectors: ObservationSection {
                inertial: vec![[1.0 / s3, -1.0 / s3, 1.0 / s3], [0.0, 0.0, 1.0]],
                weights: vec![1.0, 1.0],
                bias: vec![[-0.1, 0.1, 0.05], [0.0, 0.0, 0.1]],
                noise: vec![0.1, 0.1],
            },
            landmarks: ObservationSection {
                inertial: vec![[0.5, 2f64.sqrt(), 1.0]],
                weights: vec![1.0],
                bias: vec![[0.03, 0.02, -0.02]],
                noise: vec![0.3],
            },
            initial: InitialSection {
                r_true: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
                p_true: [0.0; 3],
                r_hat: [
                    [-0.8816, 0.2386, 0.4074],
                    [0.4498, 0.1625, 0.8782],
                    [0.1433, 0.9574, -0.2505],
                ],
                p_hat: [-4.0, 5.0, 3.0],
                b_hat: [0.0; 6],
            },
        }
    }

    /// Looks up a built-in scenario by name.
    pub fn named(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::reference()),
            other => Err(Error::InvalidConfig(format!("unknown scenario '{other}' (available: paper)"))),
        }
    }

    /// Zeroes every measurement noise deviation and every vector/landmark bias.
    /// Velocity biases stay.
    pub fn noise_free(mut self) -> Self {
        self.velocity.sigma_omega = 0.0;
        self.velocity.sigma_v = 0.0;
        for obs in [&mut self.vectors, &mut self.landmarks] {
            obs.noise.iter_mut().for_each(|s| *s = 0.0);
            obs.bias.iter_mut().for_each(|b| *b = [0.0; 3]);
        }
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read config file {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::InvalidConfig(msg) => Error::InvalidConfig(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn dump(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trips_exactly() {
        let cfg = ScenarioConfig::reference();
        let text = cfg.dump().unwrap();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);

        let mut odd = ScenarioConfig::reference().noise_free();
        odd.run.dt = 0.1 + 0.2;
        odd.run.seed = u64::MAX >> 1;
        odd.gains.k_w = std::f64::consts::PI;
        odd.initial.b_hat = [1e-300, -5e-324, 1.0 / 3.0, 2.5e10, -0.0, 7.0];
        let text = odd.dump().unwrap();
        let back = ScenarioConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, odd);
        assert!(back.initial.b_hat[4].is_sign_negative());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = ScenarioConfig::reference().dump().unwrap();
        text = text.replace("[gains]\n", "[gains]\nk_p = 3.0\n");
        let err = ScenarioConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("k_p"), "{err}");

        let extra = format!("{}\n[extra]\nx = 1\n", ScenarioConfig::reference().dump().unwrap());
        assert!(ScenarioConfig::from_toml_str(&extra).is_err());
    }

    #[test]
    fn missing_keys_are_rejected() {
        let text = ScenarioConfig::reference().dump().unwrap().replace("gamma = 1.0\n", "");
        assert!(ScenarioConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = ScenarioConfig::load(Path::new("/nonexistent/scenario.toml")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/scenario.toml"));
    }

    #[test]
    fn named_scenarios() {
        assert_eq!(ScenarioConfig::named("paper").unwrap(), ScenarioConfig::reference());
        assert!(ScenarioConfig::named("moon").is_err());
    }

    #[test]
    fn noise_free_keeps_velocity_bias() {
        let cfg = ScenarioConfig::reference().noise_free();
        assert_eq!(cfg.velocity.bias_omega, [0.1, -0.1, 0.1]);
        assert_eq!(cfg.velocity.sigma_omega, 0.0);
        assert_eq!(cfg.landmarks.bias, vec![[0.0; 3]]);
        assert_eq!(cfg.vectors.noise, vec![0.0, 0.0]);
    }

    #[test]
    fn reference_values() {
        let cfg = ScenarioConfig::reference();
        assert_eq!(cfg.velocity.bias_v, [0.2, 0.5, 0.1]);
        assert_eq!(cfg.landmarks.bias[0], [0.03, 0.02, -0.02]);
        assert_eq!(cfg.vectors.bias[0], [-0.1, 0.1, 0.05]);
        assert_eq!(cfg.envelope.delta_bar, cfg.envelope.xi0);
        assert_eq!(cfg.initial.p_hat, [-4.0, 5.0, 3.0]);
    }
}
