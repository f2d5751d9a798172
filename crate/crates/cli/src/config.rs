//! Flat `key = value` run configuration. Blank lines and `#` comments are
//! ignored; relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};
use std::time::Duration;

use flexride_core::horizon::HorizonConfig;
use flexride_core::solve::SolveLimits;
use flexride_core::{parse_rational, AccessMethod, Backend, ModelConfig, ObjectiveMode, PreprocessOptions, Rational64};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub nodes: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub hov_nodes: Option<PathBuf>,
    pub trips: Option<PathBuf>,
    pub seed: u64,
    pub model: ModelConfig,
    pub weight_factor: Rational64,
    pub weighted: bool,
    pub access: AccessMethod,
    pub yen_k: usize,
    pub temporal_filter: bool,
    pub period: i64,
    pub start: i64,
    pub end: i64,
    pub backend: String,
    pub solver_cmd: Option<String>,
    pub max_nodes: u64,
    pub max_seconds: u64,
    pub oracle_count: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            nodes: None,
            edges: None,
            hov_nodes: None,
            trips: None,
            seed: 0,
            model: ModelConfig::default(),
            weight_factor: Rational64::from_integer(2),
            weighted: false,
            access: AccessMethod::Yen(10),
            yen_k: 10,
            temporal_filter: true,
            period: 300,
            start: 9 * 3600,
            end: 19 * 3600,
            backend: "exact".into(),
            solver_cmd: None,
            max_nodes: SolveLimits::default().max_nodes,
            max_seconds: SolveLimits::default().max_time.as_secs(),
            oracle_count: 50,
            out: PathBuf::from("out"),
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Usage(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Usage(format!("{key}: not a valid number: {v:?}")))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text, base)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str, base: &Path) -> Result<(), CliError> {
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", k + 1)))?;
            self.set(key.trim(), value.trim(), base)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, v: &str, base: &Path) -> Result<(), CliError> {
        let path = |v: &str| base.join(v);
        match key {
            "nodes" => self.nodes = Some(path(v)),
            "edges" => self.edges = Some(path(v)),
            "hov_nodes" => self.hov_nodes = Some(path(v)),
            "trips" => self.trips = Some(path(v)),
            "out" => self.out = path(v),
            "seed" => self.seed = parse_num(key, v)?,
            "flex" => self.model.flex_roles = parse_bool(key, v)?,
            "hov" => self.model.hov_enabled = parse_bool(key, v)?,
            "n_h" => self.model.n_h = parse_num(key, v)?,
            "count_driver" => self.model.count_driver = parse_bool(key, v)?,
            "objective" => {
                self.weighted = match v {
                    "as-printed" => false,
                    "weighted" => true,
                    _ => return Err(CliError::Usage(format!("objective: expected as-printed or weighted, got {v:?}"))),
                }
            }
            "weight_factor" => {
                self.weight_factor =
                    parse_rational(v).ok_or_else(|| CliError::Usage(format!("weight_factor: not a number: {v:?}")))?
            }
            "include_driver_arcs" => self.model.objective.include_driver_arcs = parse_bool(key, v)?,
            "access" => {
                self.access = match v {
                    "exact" => AccessMethod::Exact,
                    "yen" => AccessMethod::Yen(self.yen_k),
                    _ => return Err(CliError::Usage(format!("access: expected exact or yen, got {v:?}"))),
                }
            }
            "yen_k" => {
                self.yen_k = parse_num(key, v)?;
                if self.yen_k == 0 {
                    return Err(CliError::Usage("yen_k must be positive".into()));
                }
                if let AccessMethod::Yen(_) = self.access {
                    self.access = AccessMethod::Yen(self.yen_k);
                }
            }
            "temporal_filter" => self.temporal_filter = parse_bool(key, v)?,
            "period" => self.period = parse_num(key, v)?,
            "start" => self.start = parse_num(key, v)?,
            "end" => self.end = parse_num(key, v)?,
            "backend" => match v {
                "exact" | "external" => self.backend = v.to_owned(),
                _ => return Err(CliError::Usage(format!("backend: expected exact or external, got {v:?}"))),
            },
            "solver_cmd" => self.solver_cmd = Some(v.to_owned()),
            "max_nodes" => self.max_nodes = parse_num(key, v)?,
            "max_seconds" => self.max_seconds = parse_num(key, v)?,
            "oracle_count" => self.oracle_count = parse_num(key, v)?,
            _ => return Err(CliError::Usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        let mut m = self.model;
        let include = m.objective.include_driver_arcs;
        m.objective = if self.weighted {
            ObjectiveMode::weighted(self.weight_factor)
        } else {
            ObjectiveMode::as_printed()
        };
        m.objective.include_driver_arcs = include;
        m
    }

    pub fn preprocess_options(&self) -> PreprocessOptions {
        PreprocessOptions {
            method: self.access,
            temporal_filter: self.temporal_filter,
        }
    }

    pub fn limits(&self) -> SolveLimits {
        SolveLimits {
            max_nodes: self.max_nodes,
            max_time: Duration::from_secs(self.max_seconds),
        }
    }

    pub fn backend(&self) -> Result<Backend, CliError> {
        match self.backend.as_str() {
            "external" => {
                let command = self
                    .solver_cmd
                    .clone()
                    .ok_or_else(|| CliError::Usage("backend = external needs solver_cmd".into()))?;
                Ok(Backend::External {
                    command,
                    workdir: self.out.join("external"),
                })
            }
            _ => Ok(Backend::Exact(self.limits())),
        }
    }

    pub fn horizon(&self) -> Result<HorizonConfig, CliError> {
        if self.period <= 0 {
            return Err(CliError::Usage("period must be positive".into()));
        }
        if self.start > self.end {
            return Err(CliError::Usage("start must not be after end".into()));
        }
        Ok(HorizonConfig {
            period: self.period,
            start: self.start,
            end: self.end,
            model: self.model_config(),
            preprocess: self.preprocess_options(),
            backend: self.backend()?,
        })
    }
}
