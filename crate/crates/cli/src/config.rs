//! Experiment configuration: per-command defaults, then an INI file, then
//! command-line overrides.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use morrey_core::capacity::SolverOptions;
use morrey_core::fixtures::FIXTURE_NAMES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyFixture,
    MorreyNorm,
    Riesz,
    CapacityScaling,
    Hausdorff,
    IsocapCheck,
    ScanSingular,
    Reconstruct,
    Report,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::VerifyFixture,
        Command::MorreyNorm,
        Command::Riesz,
        Command::CapacityScaling,
        Command::Hausdorff,
        Command::IsocapCheck,
        Command::ScanSingular,
        Command::Reconstruct,
        Command::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyFixture => "verify-fixture",
            Command::MorreyNorm => "morrey-norm",
            Command::Riesz => "riesz",
            Command::CapacityScaling => "capacity-scaling",
            Command::Hausdorff => "hausdorff",
            Command::IsocapCheck => "isocap-check",
            Command::ScanSingular => "scan-singular",
            Command::Reconstruct => "reconstruct",
            Command::Report => "report",
        }
    }
}

impl FromStr for Command {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| ConfigError(format!("unknown subcommand `{s}`")))
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

/// Which scalar a vector fixture contributes to norm and potential runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    /// `|u|` (the value itself for scalar fixtures).
    Value,
    /// `|Du|` by central differences.
    GradientNorm,
    /// `|Du|` from the closed-form gradient.
    ExactGradientNorm,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSection {
    pub n: usize,
    pub half_width: f64,
    pub cells: usize,
    /// Multi-resolution ladder; the last entry is the finest grid.
    pub resolutions: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamSection {
    pub p: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub mu: Option<f64>,
    pub d: f64,
    pub q: f64,
    pub m: u32,
    /// λ of the `morrey_test` fixture, when it differs from `lambda`.
    pub fixture_lambda: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderSection {
    pub radii: Vec<f64>,
    pub eps: Vec<f64>,
    pub t: Vec<f64>,
    /// Scan ladder length `2h, 4h, …`.
    pub levels: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverSection {
    pub max_iterations: usize,
    pub patience: usize,
    pub tolerance: f64,
}

impl SolverSection {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            max_iterations: self.max_iterations,
            patience: self.patience,
            tolerance: self.tolerance,
            ..SolverOptions::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtraSection {
    pub field: FieldKind,
    /// Representation order.
    pub order: u32,
    pub sigma: f64,
    pub cutoff: f64,
    pub segment_length: f64,
    pub instances: usize,
    pub pool_size: usize,
    pub spread_bound: f64,
    pub samples: usize,
    /// Outer radius of the monotonicity quantity.
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub fixture: String,
    pub seed: u64,
    pub grid: GridSection,
    pub params: ParamSection,
    pub ladders: LadderSection,
    pub solver: SolverSection,
    pub extra: ExtraSection,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub threads: Option<usize>,
}

fn dyadic(top: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| top / 2f64.powi(k as i32)).collect()
}

impl ExperimentConfig {
    /// The reference experiment of each command.
    pub fn defaults(command: Command) -> Self {
        let solver = SolverOptions::default();
        let mut cfg = ExperimentConfig {
            command,
            fixture: "harmonic_map_sphere".into(),
            seed: 42,
            grid: GridSection { n: 3, half_width: 1.0, cells: 64, resolutions: vec![16, 32, 64] },
            params: ParamSection { p: 2.0, lambda: 2.0, alpha: 1.0, mu: None, d: 1.0, q: 3.0, m: 1, fixture_lambda: None },
            ladders: LadderSection {
                radii: dyadic(0.5, 3),
                eps: vec![],
                t: (0..8).map(|k| (25 + 10 * k) as f64 / 100.0).collect(),
                levels: 3,
            },
            solver: SolverSection {
                max_iterations: solver.max_iterations,
                patience: solver.patience,
                tolerance: solver.tolerance,
            },
            extra: ExtraSection {
                field: FieldKind::GradientNorm,
                order: 2,
                sigma: 0.2,
                cutoff: 0.7,
                segment_length: 1.0,
                instances: 50,
                pool_size: 12,
                spread_bound: 10.0,
                samples: 1000,
                radius: 1.0,
            },
            out: PathBuf::from("out"),
            threads: None,
        };
        match command {
            Command::VerifyFixture => {
                cfg.fixture = "de_giorgi".into();
                cfg.grid.resolutions = vec![24, 32, 48, 64];
            }
            Command::Riesz => cfg.grid.cells = 32,
            Command::MorreyNorm => cfg.extra.field = FieldKind::ExactGradientNorm,
            Command::CapacityScaling | Command::IsocapCheck => {
                cfg.params.lambda = 2.5;
                cfg.ladders.radii = dyadic(0.5, 4);
            }
            _ => {}
        }
        cfg
    }

    /// Defaults for `command`, overridden by the INI file when given.
    pub fn load(command: Command, path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::defaults(command);
        if let Some(path) = path {
            let ini = ini::Ini::load_from_file(path)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            for (section, props) in &ini {
                for (key, value) in props.iter() {
                    cfg.set(section.unwrap_or("experiment"), key, value.trim())?;
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, section: &str, key: &str, v: &str) -> Result<(), ConfigError> {
        let at = format!("[{section}] {key}");
        match (section, key) {
            ("experiment", "command") => {
                let c: Command = v.parse()?;
                if c != self.command {
                    return Err(ConfigError(format!("{at} = {v} conflicts with subcommand {}", self.command.name())));
                }
            }
            ("experiment", "fixture") => self.fixture = v.to_string(),
            ("experiment", "seed") => self.seed = num(&at, v)?,
            ("experiment", "out") => self.out = PathBuf::from(v),
            ("experiment", "threads") => self.threads = Some(num(&at, v)?),
            ("grid", "n") => self.grid.n = num(&at, v)?,
            ("grid", "half_width") => self.grid.half_width = num(&at, v)?,
            ("grid", "cells") => self.grid.cells = num(&at, v)?,
            ("grid", "resolutions") => self.grid.resolutions = list(&at, v)?,
            ("params", "p") => self.params.p = num(&at, v)?,
            ("params", "lambda") => self.params.lambda = num(&at, v)?,
            ("params", "alpha") => self.params.alpha = num(&at, v)?,
            ("params", "mu") => self.params.mu = Some(num(&at, v)?),
            ("params", "d") => self.params.d = num(&at, v)?,
            ("params", "q") => self.params.q = num(&at, v)?,
            ("params", "m") => self.params.m = num(&at, v)?,
            ("params", "fixture_lambda") => self.params.fixture_lambda = Some(num(&at, v)?),
            ("ladders", "radii") => self.ladders.radii = list(&at, v)?,
            ("ladders", "eps") => self.ladders.eps = list(&at, v)?,
            ("ladders", "t") => self.ladders.t = list(&at, v)?,
            ("ladders", "levels") => self.ladders.levels = num(&at, v)?,
            ("solver", "max_iterations") => self.solver.max_iterations = num(&at, v)?,
            ("solver", "patience") => self.solver.patience = num(&at, v)?,
            ("solver", "tolerance") => self.solver.tolerance = num(&at, v)?,
            ("options", "field") => {
                self.extra.field = match v {
                    "value" => FieldKind::Value,
                    "gradient_norm" => FieldKind::GradientNorm,
                    "exact_gradient_norm" => FieldKind::ExactGradientNorm,
                    _ => {
                        return Err(ConfigError(format!(
                            "{at}: expected value, gradient_norm or exact_gradient_norm, got `{v}`"
                        )))
                    }
                }
            }
            ("options", "order") => self.extra.order = num(&at, v)?,
            ("options", "sigma") => self.extra.sigma = num(&at, v)?,
            ("options", "cutoff") => self.extra.cutoff = num(&at, v)?,
            ("options", "segment_length") => self.extra.segment_length = num(&at, v)?,
            ("options", "instances") => self.extra.instances = num(&at, v)?,
            ("options", "pool_size") => self.extra.pool_size = num(&at, v)?,
            ("options", "spread_bound") => self.extra.spread_bound = num(&at, v)?,
            ("options", "samples") => self.extra.samples = num(&at, v)?,
            ("options", "radius") => self.extra.radius = num(&at, v)?,
            _ => return Err(ConfigError(format!("unknown key {at}"))),
        }
        Ok(())
    }

    /// `--resolution N`: the finest grid becomes `N` cells and the ladder
    /// keeps its ratios (rounded to even counts).
    pub fn override_resolution(&mut self, cells: usize) -> Result<(), ConfigError> {
        if cells < 2 {
            return Err(ConfigError(format!("--resolution {cells} is below 2 cells")));
        }
        let finest = self.grid.resolutions.iter().copied().max().unwrap_or(self.grid.cells).max(1);
        self.grid.resolutions = self
            .grid
            .resolutions
            .iter()
            .map(|&r| ((r as f64 * cells as f64 / finest as f64 / 2.0).round() as usize * 2).max(2))
            .collect();
        self.grid.cells = cells;
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.command != Command::Report && !FIXTURE_NAMES.contains(&self.fixture.as_str()) {
            return Err(ConfigError(format!("unknown fixture `{}`", self.fixture)));
        }
        if !(1..=4).contains(&self.grid.n) {
            return Err(ConfigError(format!("[grid] n = {} outside 1..=4", self.grid.n)));
        }
        if self.grid.cells == 0 || self.grid.resolutions.contains(&0) {
            return Err(ConfigError("grid cell counts must be positive".into()));
        }
        if !(self.grid.half_width > 0.0) {
            return Err(ConfigError("[grid] half_width must be positive".into()));
        }
        let mut sorted = self.grid.resolutions.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted != self.grid.resolutions {
            return Err(ConfigError("[grid] resolutions must be strictly increasing".into()));
        }
        Ok(())
    }

    /// The finest multi-resolution grid (or `cells` without a ladder).
    pub fn finest(&self) -> usize {
        self.grid.resolutions.last().copied().unwrap_or(self.grid.cells)
    }
}

fn num<T: FromStr>(at: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError(format!("{at}: cannot parse `{v}`")))
}

fn list<T: FromStr>(at: &str, v: &str) -> Result<Vec<T>, ConfigError> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| num(at, s.trim())).collect()
}
