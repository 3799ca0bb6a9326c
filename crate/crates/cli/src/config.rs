//! Run configuration: a flat TOML file whose keys are the field names below.
//!
//! Every key is optional; defaults reproduce the reference 30-year setting. Relative paths
//! are resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use lifefolio::lifecycle::{Instruments, LifecycleConfig};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    /// Value the insurance spread with the Monte-Carlo discount factor instead of h/(h+r).
    pub paper_faithful_v: bool,
    /// Take the income-drop year from the Monte-Carlo mean strike time.
    pub mc_kstart: bool,
    pub emit_svg: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub returns_path: PathBuf,
    pub periods_per_year: u32,
    pub r_f: f64,
    pub frontier_points: usize,
    pub mc_draws: usize,
    pub mc_seed: u64,
    pub lifecycle: LifecycleConfig,
    pub output_dir: PathBuf,
    pub flags: Flags,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            returns_path: PathBuf::from("returns.csv"),
            periods_per_year: 12,
            r_f: 0.025,
            frontier_points: 50,
            mc_draws: 10_000,
            mc_seed: 42,
            lifecycle: LifecycleConfig::default(),
            output_dir: PathBuf::from("out"),
            flags: Flags::default(),
        }
    }
}

/// On-disk layout. Mirrors [`RunConfig`] with the lifecycle and flag fields flattened.
#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    returns_path: PathBuf,
    periods_per_year: u32,
    r_f: f64,
    frontier_points: usize,
    mc_draws: usize,
    mc_seed: u64,
    output_dir: PathBuf,
    paper_faithful_v: bool,
    mc_kstart: bool,
    emit_svg: bool,

    years: usize,
    discount_rate: f64,
    r_borrow: f64,
    r_save: f64,
    income_high: f64,
    income_low: f64,
    d_floor: f64,
    initial_saving: f64,
    risk_aversion: f64,
    house_initial: f64,
    house_annual: f64,
    house_years: usize,
    house_growth: f64,
    house_utility: f64,
    hazard_rate: f64,
    lump_sum: f64,
    spread: f64,
    enable_stock: bool,
    enable_borrow: bool,
    enable_save: bool,
    enable_house: bool,
    enable_insurance: bool,
}

impl Default for ConfigFile {
    fn default() -> Self {
        let run = RunConfig::default();
        let l = run.lifecycle;
        Self {
            returns_path: run.returns_path,
            periods_per_year: run.periods_per_year,
            r_f: run.r_f,
            frontier_points: run.frontier_points,
            mc_draws: run.mc_draws,
            mc_seed: run.mc_seed,
            output_dir: run.output_dir,
            paper_faithful_v: false,
            mc_kstart: false,
            emit_svg: false,
            years: l.years,
            discount_rate: l.discount_rate,
            r_borrow: l.r_borrow,
            r_save: l.r_save,
            income_high: l.income_high,
            income_low: l.income_low,
            d_floor: l.d_floor,
            initial_saving: l.initial_saving,
            risk_aversion: l.risk_aversion,
            house_initial: l.house_initial,
            house_annual: l.house_annual,
            house_years: l.house_years,
            house_growth: l.house_growth,
            house_utility: l.house_utility,
            hazard_rate: l.hazard_rate,
            lump_sum: l.lump_sum,
            spread: l.spread,
            enable_stock: l.instruments.stock,
            enable_borrow: l.instruments.borrow,
            enable_save: l.instruments.save,
            enable_house: l.instruments.house,
            enable_insurance: l.instruments.insurance,
        }
    }
}

impl From<ConfigFile> for RunConfig {
    fn from(f: ConfigFile) -> Self {
        Self {
            returns_path: f.returns_path,
            periods_per_year: f.periods_per_year,
            r_f: f.r_f,
            frontier_points: f.frontier_points,
            mc_draws: f.mc_draws,
            mc_seed: f.mc_seed,
            output_dir: f.output_dir,
            flags: Flags {
                paper_faithful_v: f.paper_faithful_v,
                mc_kstart: f.mc_kstart,
                emit_svg: f.emit_svg,
            },
            lifecycle: LifecycleConfig {
                years: f.years,
                discount_rate: f.discount_rate,
                r_borrow: f.r_borrow,
                r_save: f.r_save,
                income_high: f.income_high,
                income_low: f.income_low,
                d_floor: f.d_floor,
                initial_saving: f.initial_saving,
                risk_aversion: f.risk_aversion,
                house_initial: f.house_initial,
                house_annual: f.house_annual,
                house_years: f.house_years,
                house_growth: f.house_growth,
                house_utility: f.house_utility,
                hazard_rate: f.hazard_rate,
                lump_sum: f.lump_sum,
                spread: f.spread,
                instruments: Instruments {
                    stock: f.enable_stock,
                    borrow: f.enable_borrow,
                    save: f.enable_save,
                    house: f.enable_house,
                    insurance: f.enable_insurance,
                },
            },
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.message().to_owned(),
        })?;
        let mut config = RunConfig::from(file);
        if let Some(dir) = path.parent() {
            for p in [&mut config.returns_path, &mut config.output_dir] {
                if p.is_relative() && !p.as_os_str().is_empty() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_owned()));
        if self.returns_path.as_os_str().is_empty() {
            return invalid("returns_path is empty");
        }
        if self.output_dir.as_os_str().is_empty() {
            return invalid("output_dir is empty");
        }
        if self.periods_per_year == 0 {
            return invalid("periods_per_year must be positive");
        }
        if self.frontier_points < 2 {
            return invalid("frontier_points must be at least 2");
        }
        if self.mc_draws == 0 {
            return invalid("mc_draws must be at least 1");
        }
        if !self.r_f.is_finite() {
            return invalid("r_f must be finite");
        }
        self.lifecycle
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}
