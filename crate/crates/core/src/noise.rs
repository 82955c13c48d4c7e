//! Noise configurations and samplers.
//!
//! A [`NoiseConfig`] names one of the studied noise sources (or a coherent +
//! incoherent composite). [`NoiseConfig::parts`] splits it into the three
//! orthogonal knobs the executor actually uses: a coherent parameter spread,
//! an incoherent channel model, and a measurement (shot) setting.

use serde::{Deserialize, Serialize};

use crate::error::{QrlError, Result};
use crate::rng::RngStream;
use crate::shots::ShotAllocConfig;

/// Per-gate error strengths of the custom hardware model. Field names follow
/// the rows of the hardware error table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareNoise {
    /// Single-qubit depolarizing probability after every one-qubit gate.
    pub depol_1q: f64,
    /// Two-qubit depolarizing probability after every two-qubit gate.
    pub depol_2q: f64,
    /// Amplitude-damping decay after every gate, on each involved qubit.
    pub amp_damp: f64,
    /// Bit-flip probability of each measured bit.
    pub meas_bitflip: f64,
}

impl HardwareNoise {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("depol_1q", self.depol_1q),
            ("depol_2q", self.depol_2q),
            ("amp_damp", self.amp_damp),
            ("meas_bitflip", self.meas_bitflip),
        ] {
            check_probability(name, v)?;
        }
        Ok(())
    }
}

/// Named hardware configuration from the error-strength table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardwareConfigPreset {
    pub label: char,
    pub noise: HardwareNoise,
}

/// Hardware presets `a`–`d`. `a` uses published superconducting-device error rates;
/// `b` raises amplitude damping, `c` raises everything, `d` is extreme.
pub fn preset(label: &str) -> Result<HardwareConfigPreset> {
    let (l, p1, p2, g, pm) = match label.trim().to_ascii_lowercase().as_str() {
        "a" => ('a', 0.001, 0.01, 0.0003, 0.01),
        "b" => ('b', 0.001, 0.01, 0.03, 0.01),
        "c" => ('c', 0.01, 0.1, 0.03, 0.1),
        "d" => ('d', 0.1, 0.2, 0.1, 0.1),
        _ => return Err(QrlError::UnknownPreset(label.to_string())),
    };
    Ok(HardwareConfigPreset {
        label: l,
        noise: HardwareNoise {
            depol_1q: p1,
            depol_2q: p2,
            amp_damp: g,
            meas_bitflip: pm,
        },
    })
}

/// How many measurements back one expectation estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotMode {
    Fixed(u64),
    Flexible(ShotAllocConfig),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseConfig {
    #[default]
    Exact,
    Shot {
        mode: ShotMode,
    },
    GaussianCoherent {
        sigma: f64,
    },
    /// Local Pauli-twirl depolarizing on every qubit after every moment.
    Depolarizing {
        p: f64,
    },
    CustomHardware(HardwareNoise),
    /// Coherent spread combined with any non-coherent variant.
    Composite {
        sigma: f64,
        inner: Box<NoiseConfig>,
    },
}

/// Incoherent channel model applied during trajectory simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelNoise {
    Depolarizing { p: f64 },
    Hardware(HardwareNoise),
}

impl ChannelNoise {
    pub fn meas_bitflip(&self) -> f64 {
        match self {
            ChannelNoise::Depolarizing { .. } => 0.0,
            ChannelNoise::Hardware(h) => h.meas_bitflip,
        }
    }
}

/// Measurement setting of an estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShotSetting {
    Exact,
    Fixed(u64),
    Flexible(ShotAllocConfig),
}

/// The three independent knobs a [`NoiseConfig`] decomposes into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParts {
    pub sigma: f64,
    pub channel: Option<ChannelNoise>,
    pub shots: ShotSetting,
}

impl NoiseConfig {
    pub fn exact() -> Self {
        NoiseConfig::Exact
    }

    pub fn gaussian(sigma: f64) -> Self {
        NoiseConfig::GaussianCoherent { sigma }
    }

    pub fn depolarizing(p: f64) -> Self {
        NoiseConfig::Depolarizing { p }
    }

    pub fn shots(m: u64) -> Self {
        NoiseConfig::Shot {
            mode: ShotMode::Fixed(m),
        }
    }

    pub fn flexible(cfg: ShotAllocConfig) -> Self {
        NoiseConfig::Shot {
            mode: ShotMode::Flexible(cfg),
        }
    }

    pub fn hardware(label: &str) -> Result<Self> {
        Ok(NoiseConfig::CustomHardware(preset(label)?.noise))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseConfig::Exact => Ok(()),
            NoiseConfig::Shot { mode } => match mode {
                ShotMode::Fixed(0) => Err(QrlError::InvalidArgument("shot count must be >= 1".into())),
                ShotMode::Fixed(_) => Ok(()),
                ShotMode::Flexible(c) => c.validate(),
            },
            NoiseConfig::GaussianCoherent { sigma } => check_sigma(*sigma),
            NoiseConfig::Depolarizing { p } => check_probability("p", *p),
            NoiseConfig::CustomHardware(h) => h.validate(),
            NoiseConfig::Composite { sigma, inner } => {
                check_sigma(*sigma)?;
                if matches!(
                    **inner,
                    NoiseConfig::GaussianCoherent { .. } | NoiseConfig::Composite { .. }
                ) {
                    return Err(QrlError::InvalidArgument(
                        "composite noise needs a non-coherent inner variant".into(),
                    ));
                }
                inner.validate()
            }
        }
    }

    pub fn parts(&self) -> NoiseParts {
        let mut parts = NoiseParts {
            sigma: 0.0,
            channel: None,
            shots: ShotSetting::Exact,
        };
        self.fill(&mut parts);
        parts
    }

    fn fill(&self, parts: &mut NoiseParts) {
        match self {
            NoiseConfig::Exact => {}
            NoiseConfig::Shot { mode } => {
                parts.shots = match *mode {
                    ShotMode::Fixed(m) => ShotSetting::Fixed(m),
                    ShotMode::Flexible(c) => ShotSetting::Flexible(c),
                }
            }
            NoiseConfig::GaussianCoherent { sigma } => parts.sigma = *sigma,
            NoiseConfig::Depolarizing { p } => {
                parts.channel = Some(ChannelNoise::Depolarizing { p: *p })
            }
            NoiseConfig::CustomHardware(h) => parts.channel = Some(ChannelNoise::Hardware(*h)),
            NoiseConfig::Composite { sigma, inner } => {
                inner.fill(parts);
                parts.sigma = *sigma;
            }
        }
    }

    /// Same configuration with the coherent spread replaced by `sigma`.
    pub fn with_sigma(&self, sigma: f64) -> NoiseConfig {
        let base = match self {
            NoiseConfig::GaussianCoherent { .. } => NoiseConfig::Exact,
            NoiseConfig::Composite { inner, .. } => (**inner).clone(),
            other => other.clone(),
        };
        if sigma == 0.0 {
            base
        } else if base == NoiseConfig::Exact {
            NoiseConfig::GaussianCoherent { sigma }
        } else {
            NoiseConfig::Composite {
                sigma,
                inner: Box::new(base),
            }
        }
    }

    pub fn is_exact(&self) -> bool {
        let p = self.parts();
        p.sigma == 0.0 && p.channel.is_none() && p.shots == ShotSetting::Exact
    }
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(QrlError::InvalidArgument(format!(
            "{name} = {v} is not a probability"
        )));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(QrlError::InvalidArgument(format!("sigma = {sigma} must be >= 0")));
    }
    Ok(())
}

/// Additive offsets for the trainable rotation parameters, held fixed for one estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentPerturbation {
    pub delta_theta: Vec<f64>,
}

impl CoherentPerturbation {
    pub fn apply_to(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().zip(&self.delta_theta).map(|(t, d)| t + d).collect()
    }
}

/// i.i.d. `N(0, σ²)` offsets for `m` parameters.
pub fn sample_perturbation(m: usize, sigma: f64, rng: &mut RngStream) -> CoherentPerturbation {
    let delta_theta = if sigma == 0.0 {
        vec![0.0; m]
    } else {
        (0..m).map(|_| sigma * rng.normal()).collect()
    };
    CoherentPerturbation { delta_theta }
}
