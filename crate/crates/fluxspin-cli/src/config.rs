//! Run configuration: one structured text file per run, validated against
//! a versioned schema with unknown keys rejected, plus command-line
//! overrides.  The fully resolved configuration is echoed into every
//! result envelope so any run can be replayed.

use fluxspin::propagator::Occupation;
use fluxspin::{FluctuatorSpec, Vec3};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Master seed for randomized commands; echoed resolved.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    /// Worker-pool size; wall time only, never results.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub out_dir: Option<String>,
    /// Emit vector-graphics plots (same as --plot).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub plot: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub crossover: Option<CrossoverConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fig2: Option<Fig2Config>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mc_validate: Option<McValidateConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sweetspot: Option<SweetspotConfig>,
}

/// Fluctuator model as written in configuration files: rate matrix (entry
/// `[i][j]` = rate from state j to state i) and per-state precession
/// vectors as plain 3-arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    pub rates: Vec<Vec<f64>>,
    pub omegas: Vec<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub labels: Option<Vec<String>>,
}

impl SpecConfig {
    pub fn to_spec(&self) -> fluxspin::Result<FluctuatorSpec> {
        let spec = FluctuatorSpec {
            n_states: self.rates.len(),
            rates: self.rates.clone(),
            omegas: self.omegas.iter().map(|&[x, y, z]| Vec3::new(x, y, z)).collect(),
            labels: self.labels.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn default_points() -> usize {
    500
}

fn default_occupation() -> Occupation {
    Occupation::GroundOnly
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub spec: SpecConfig,
    pub spin: [f64; 3],
    #[serde(default = "default_occupation")]
    pub occupation: Occupation,
    pub t_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_direction() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn default_delta_min() -> f64 {
    0.01
}

fn default_delta_max() -> f64 {
    100.0
}

fn default_crossover_points() -> usize {
    40
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossoverConfig {
    pub r_ab: f64,
    pub r_ba: f64,
    #[serde(default)]
    pub base: [f64; 3],
    #[serde(default = "default_direction")]
    pub direction: [f64; 3],
    /// Scan bounds in units of the total switching rate.
    #[serde(default = "default_delta_min")]
    pub delta_min_over_rtot: f64,
    #[serde(default = "default_delta_max")]
    pub delta_max_over_rtot: f64,
    #[serde(default = "default_crossover_points")]
    pub points: usize,
    /// Explicit grid (units of r_tot), overriding the log-spaced bounds.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub deltas_over_rtot: Option<Vec<f64>>,
}

fn default_n_states() -> usize {
    3
}

fn default_sigma_ratio() -> f64 {
    2.5
}

fn default_gamma_rad() -> f64 {
    86.0
}

fn default_realizations() -> usize {
    50
}

fn default_gamma0() -> f64 {
    3.4e-3
}

fn default_gamma_dark() -> f64 {
    3.0e-4
}

fn default_omega_min() -> f64 {
    0.005
}

fn default_omega_max() -> f64 {
    0.22
}

fn default_fig2_points() -> usize {
    20
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig2Config {
    #[serde(default = "default_n_states")]
    pub n_states: usize,
    #[serde(default = "default_sigma_ratio")]
    pub sigma_omega_ratio: f64,
    #[serde(default = "default_gamma_rad")]
    pub gamma_rad: f64,
    /// Defaults to gamma_rad when omitted.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub excitation_rate: Option<f64>,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    #[serde(default = "default_occupation")]
    pub occupation: Occupation,
    #[serde(default = "default_gamma0")]
    pub gamma0_offset: f64,
    #[serde(default = "default_gamma_dark")]
    pub gamma_dark: f64,
    #[serde(default)]
    pub resample_per_point: bool,
    /// Grid bounds in units of gamma_rad.
    #[serde(default = "default_omega_min")]
    pub omega_min_over_gamma: f64,
    #[serde(default = "default_omega_max")]
    pub omega_max_over_gamma: f64,
    #[serde(default = "default_fig2_points")]
    pub points: usize,
}

impl Fig2Config {
    /// Fill interdependent defaults so the echoed config is fully
    /// explicit.
    pub fn normalize(&mut self) {
        if self.excitation_rate.is_none() {
            self.excitation_rate = Some(self.gamma_rad);
        }
    }
}

fn default_trajectories() -> usize {
    20000
}

fn default_mc_points() -> usize {
    40
}

fn default_threshold_se() -> f64 {
    4.0
}

fn default_stationary() -> Occupation {
    Occupation::Stationary
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McValidateConfig {
    pub spec: SpecConfig,
    pub spin: [f64; 3],
    #[serde(default = "default_stationary")]
    pub occupation: Occupation,
    pub t_max: f64,
    #[serde(default = "default_mc_points")]
    pub points: usize,
    #[serde(default = "default_trajectories")]
    pub n_trajectories: usize,
    /// Pass threshold: max allowed deviation in standard-error units.
    #[serde(default = "default_threshold_se")]
    pub threshold_se: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweetspotConfig {
    pub spec: SpecConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, String> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            ));
        }
        Ok(cfg)
    }
}

pub fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Evenly spaced grid from 0 to `t_max` inclusive.
pub fn lin_grid(t_max: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| t_max * k as f64 / (points.max(2) - 1) as f64)
        .collect()
}
