//! Flat key=value run configuration with command-line overrides.
//!
//! Example file:
//!
//! ```text
//! # desk-scale sweep
//! schedule = schedule.csv
//! out = results
//! theta = 0.05,0.15,0.25
//! beta = 0.5,1,2
//! overlap = both
//! seed = 7
//! update_period = 3
//! plots = on
//! horizon = 1000
//! ```
//!
//! Unknown keys are an error; command-line flags win over file values.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use sigtune::inference::InferenceConfig;
use sigtune::metrics::Normalization;
use sigtune::model::{MinRateForm, MinRatePolicy, WeightPolicy};
use sigtune::sim::{SimConfig, SweepGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OverlapMode {
    On,
    Off,
    Both,
}

impl OverlapMode {
    pub fn values(self) -> Vec<bool> {
        match self {
            OverlapMode::On => vec![true],
            OverlapMode::Off => vec![false],
            OverlapMode::Both => vec![true, false],
        }
    }
}

/// Everything a run needs: simulation knobs plus paths and output switches.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub schedule: Option<PathBuf>,
    pub out: PathBuf,
    pub thetas: Vec<f64>,
    pub betas: Vec<f64>,
    pub overlap: OverlapMode,
    pub seed: u64,
    pub plots: bool,
    pub update_period: i64,
    pub horizon: i64,
    pub jitter: bool,
    pub initial_daily_tp: f64,
    pub extinction_floor: f64,
    pub update_bump: f64,
    pub lead_days: i64,
    pub lag_days: i64,
    pub timing: bool,
    pub weight_policy: WeightPolicy,
    pub min_rate_policy: MinRatePolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schedule: None,
            out: PathBuf::from("out"),
            thetas: vec![0.1],
            betas: vec![1.0],
            overlap: OverlapMode::On,
            seed: 0,
            plots: true,
            update_period: 3,
            horizon: 1000,
            jitter: true,
            initial_daily_tp: 500.0,
            extinction_floor: 1.0,
            update_bump: 1.5,
            lead_days: 3,
            lag_days: 3,
            timing: true,
            weight_policy: WeightPolicy::Exponential {
                w0: 1.0,
                delta: 0.9,
            },
            min_rate_policy: MinRatePolicy::disabled(),
        }
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        _ => bail!("{key}: expected on/off, got `{value}`"),
    }
}

fn parse_list(value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| anyhow!("not a number: `{}`", p.trim()))
        })
        .collect()
}

fn parse_weight_policy(value: &str) -> Result<WeightPolicy> {
    let parts: Vec<&str> = value.split(':').collect();
    match parts[0] {
        "none" => Ok(WeightPolicy::None),
        "drop_old" => {
            let days = parts
                .get(1)
                .ok_or_else(|| anyhow!("drop_old needs a day count, e.g. drop_old:30"))?
                .parse()?;
            Ok(WeightPolicy::DropOld { max_age_days: days })
        }
        "exponential" => {
            let w0 = parts.get(1).map_or(Ok(1.0), |p| p.parse())?;
            let delta = parts.get(2).map_or(Ok(0.9), |p| p.parse())?;
            Ok(WeightPolicy::Exponential { w0, delta })
        }
        "inverse_rate" => Ok(WeightPolicy::InverseRate),
        other => bail!("unknown weight policy `{other}`"),
    }
}

fn parse_min_rate(value: &str) -> Result<MinRatePolicy> {
    let parts: Vec<&str> = value.split(':').collect();
    let form = match parts[0] {
        "none" => return Ok(MinRatePolicy::disabled()),
        "lower_bound" => MinRateForm::LowerBound,
        "additive" => MinRateForm::Additive,
        "proportional" => MinRateForm::Proportional,
        other => bail!("unknown min-rate form `{other}`"),
    };
    let v: f64 = parts
        .get(1)
        .ok_or_else(|| anyhow!("min_rate needs a value, e.g. lower_bound:0.05"))?
        .parse()?;
    MinRatePolicy::flat(form, v).map_err(|e| anyhow!("{e}"))
}

impl RunConfig {
    /// Merge a key=value file into the defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", idx + 1))?;
            config
                .set(key.trim(), value.trim())
                .with_context(|| format!("line {}", idx + 1))?;
        }
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "schedule" => self.schedule = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "theta" => self.thetas = parse_list(value)?,
            "beta" => self.betas = parse_list(value)?,
            "overlap" => {
                self.overlap = match value {
                    "on" => OverlapMode::On,
                    "off" => OverlapMode::Off,
                    "both" => OverlapMode::Both,
                    _ => bail!("overlap: expected on/off/both, got `{value}`"),
                }
            }
            "seed" => self.seed = value.parse()?,
            "plots" => self.plots = parse_bool(key, value)?,
            "update_period" => self.update_period = value.parse()?,
            "horizon" => self.horizon = value.parse()?,
            "jitter" => self.jitter = parse_bool(key, value)?,
            "initial_daily_tp" => self.initial_daily_tp = value.parse()?,
            "extinction_floor" => self.extinction_floor = value.parse()?,
            "update_bump" => self.update_bump = value.parse()?,
            "lead_days" => self.lead_days = value.parse()?,
            "lag_days" => self.lag_days = value.parse()?,
            "timing" => self.timing = parse_bool(key, value)?,
            "weight_policy" => self.weight_policy = parse_weight_policy(value)?,
            "min_rate" => self.min_rate_policy = parse_min_rate(value)?,
            other => bail!("unknown config key `{other}`"),
        }
        Ok(())
    }

    /// Base simulation config; theta/beta/overlap are filled per run or cell.
    pub fn to_sim_config(&self) -> SimConfig {
        let mut sim = SimConfig::new(self.horizon, 0.0, 0.0, true, self.seed);
        sim.update_period_days = self.update_period;
        sim.weight_policy = self.weight_policy.clone();
        sim.min_rate_policy = self.min_rate_policy.clone();
        sim.normalization = Normalization::Conventional;
        sim.trace.initial_daily_tp = self.initial_daily_tp;
        sim.trace.extinction_floor = self.extinction_floor;
        sim.trace.update_bump = self.update_bump;
        sim.trace.lead_days = self.lead_days;
        sim.trace.lag_days = self.lag_days;
        sim.trace.jitter = self.jitter;
        sim.inference = InferenceConfig::default();
        sim.measure_timing = self.timing;
        sim
    }

    pub fn grid(&self) -> SweepGrid {
        SweepGrid {
            thetas: self.thetas.clone(),
            betas: self.betas.clone(),
            overlaps: self.overlap.values(),
        }
    }
}
