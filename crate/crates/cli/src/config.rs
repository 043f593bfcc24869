//! Run configuration, read from and written to TOML.
//!
//! Rates (`chi`, `lambda_bar`, `tc`, `d`, `h0`) are plain numbers in rad/s
//! (or rad²/s², s). A twisting rate quoted as `π·0.05 Hz` is entered as
//! `0.15707963267948966`; no factor of 2π is applied anywhere.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use bjj_core::noise::NoiseModel;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

pub const MAX_ATOMS: usize = 4000;
pub const MAX_TIME_POINTS: usize = 1_000_000;
pub const MAX_TRAJECTORIES: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Visibility,
    CatRelaxation,
    FisherScan,
    McValidate,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::Visibility => "visibility",
            CommandName::CatRelaxation => "cat-relaxation",
            CommandName::FisherScan => "fisher-scan",
            CommandName::McValidate => "mc-validate",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    JsonLines,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::JsonLines => "jsonl",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseConfig {
    /// Ornstein–Uhlenbeck, `h(τ) = h0 e^{−|τ|/tc}`.
    Ou { h0: f64, tc: f64 },
    /// White noise, `h(τ) = 2d δ(τ)`.
    White { d: f64 },
    /// Frozen `λ` per realisation, `a² = h0 t²`.
    Static { h0: f64 },
}

impl NoiseConfig {
    pub fn model(&self, lambda_bar: f64) -> Result<NoiseModel> {
        Ok(match *self {
            NoiseConfig::Ou { h0, tc } => NoiseModel::ornstein_uhlenbeck(lambda_bar, h0, tc)?,
            NoiseConfig::White { d } => NoiseModel::white(lambda_bar, d)?,
            NoiseConfig::Static { h0 } => NoiseModel::quasi_static(lambda_bar, h0)?,
        })
    }
}

/// `points` equally spaced times from `start` to `stop` inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                if k + 1 == self.points {
                    self.stop
                } else {
                    self.start + step * k as f64
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub trajectories: usize,
    pub dt: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// File for `visibility`, `fisher-scan` and `mc-validate`; directory for
    /// `cat-relaxation`.
    pub path: PathBuf,
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandName,
    pub atoms: usize,
    /// Twisting rates; `visibility` writes one block per entry, the other
    /// commands use the first.
    pub chi: Vec<f64>,
    pub lambda_bar: f64,
    pub q: usize,
    /// Filter amplitudes `a_q` for `cat-relaxation` and `fisher-scan`.
    pub amplitudes: Vec<f64>,
    pub noise: NoiseConfig,
    pub time: TimeGrid,
    pub mc: McConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    /// Defaults for each command.
    pub fn defaults(command: CommandName) -> Self {
        let mc_tc = PI / 10.0;
        let base = RunConfig {
            command,
            atoms: 10,
            chi: vec![1.0],
            lambda_bar: 0.0,
            q: 2,
            amplitudes: vec![0.0, 0.9, 2.9],
            noise: NoiseConfig::Static { h0: 64.0 },
            time: TimeGrid {
                start: 0.0,
                stop: 0.3,
                points: 301,
            },
            mc: McConfig {
                trajectories: 20_000,
                dt: mc_tc / 50.0,
                seed: 2011,
            },
            output: OutputConfig {
                path: PathBuf::from(command.as_str()).with_extension("csv"),
                format: Format::Csv,
            },
        };
        match command {
            CommandName::Visibility => RunConfig {
                atoms: 400,
                chi: vec![PI * 0.05, PI * 0.13, PI * 0.25],
                ..base
            },
            CommandName::CatRelaxation => RunConfig {
                output: OutputConfig {
                    path: PathBuf::from("cat-relaxation"),
                    format: Format::Csv,
                },
                ..base
            },
            CommandName::FisherScan => RunConfig {
                amplitudes: (0..=30).map(|k| k as f64 / 10.0).chain([10.0]).collect(),
                ..base
            },
            CommandName::McValidate => RunConfig {
                // a(t₂) = 0.9 at the cat formation time t₂ = π/2 for χ = 1
                noise: NoiseConfig::Ou {
                    h0: 0.81 / (2.0 * mc_tc * mc_tc * (4.0 + (-5.0f64).exp())),
                    tc: mc_tc,
                },
                time: TimeGrid {
                    start: 0.0,
                    stop: PI / 2.0,
                    points: 6,
                },
                output: OutputConfig {
                    path: PathBuf::from("mc-validate.toml"),
                    format: Format::Csv,
                },
                ..base
            },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).context("invalid configuration")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            (1..=MAX_ATOMS).contains(&self.atoms),
            "atoms must lie in 1..={MAX_ATOMS}, got {}",
            self.atoms
        );
        ensure!(!self.chi.is_empty(), "chi needs at least one value");
        for &chi in &self.chi {
            ensure!(
                chi.is_finite() && chi > 0.0,
                "chi must be positive, got {chi}"
            );
        }
        ensure!(self.lambda_bar.is_finite(), "lambda_bar must be finite");
        ensure!(
            self.q >= 2 && self.q.is_multiple_of(2),
            "q must be even and ≥ 2, got {}",
            self.q
        );
        for &a in &self.amplitudes {
            ensure!(a.is_finite() && a >= 0.0, "amplitudes must be ≥ 0, got {a}");
        }
        match self.noise {
            NoiseConfig::Ou { h0, tc } => {
                ensure!(h0.is_finite() && h0 >= 0.0, "noise.h0 must be ≥ 0");
                ensure!(tc.is_finite() && tc > 0.0, "noise.tc must be positive");
            }
            NoiseConfig::White { d } => ensure!(d.is_finite() && d >= 0.0, "noise.d must be ≥ 0"),
            NoiseConfig::Static { h0 } => {
                ensure!(h0.is_finite() && h0 >= 0.0, "noise.h0 must be ≥ 0")
            }
        }
        let t = &self.time;
        ensure!(
            t.start.is_finite() && t.stop.is_finite() && 0.0 <= t.start && t.start <= t.stop,
            "time grid needs 0 ≤ start ≤ stop"
        );
        ensure!(
            (1..=MAX_TIME_POINTS).contains(&t.points),
            "time.points must lie in 1..={MAX_TIME_POINTS}"
        );
        if t.points == 1 && t.start != t.stop {
            bail!("a single time point needs start = stop");
        }
        ensure!(
            (1..=MAX_TRAJECTORIES).contains(&self.mc.trajectories),
            "mc.trajectories must lie in 1..={MAX_TRAJECTORIES}"
        );
        ensure!(
            self.mc.dt.is_finite() && self.mc.dt > 0.0,
            "mc.dt must be positive"
        );
        Ok(())
    }
}
