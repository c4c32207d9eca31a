//! Flat key = value scenario configs.
//!
//! The format is a plain text file, one assignment per line, `#` starting a
//! comment. Every key is spelled out once; unknown or repeated keys are
//! rejected so a config can never silently drift.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use witsim::dynamics::{default_dt, EvolutionPath, McwfConfig, Model, ModelConfig};
use witsim::linalg::C64;
use witsim::witnesses::WitnessId;

/// One runnable scenario: model, witness list, grid, evolution paths, and
/// output destination.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub model: ModelConfig,
    pub witnesses: Vec<WitnessId>,
    pub t_max: f64,
    pub n_samples: usize,
    pub paths: Vec<EvolutionPath>,
    pub n_traj: usize,
    pub seed: u64,
    pub dt: f64,
    pub out: PathBuf,
}

impl ScenarioConfig {
    pub fn mcwf(&self) -> McwfConfig {
        McwfConfig {
            n_traj: self.n_traj,
            seed: self.seed,
            dt: self.dt,
        }
    }
}

const KEYS: &[&str] = &[
    "model",
    "gamma1",
    "gamma2",
    "nbar1",
    "nbar2",
    "kappa",
    "p",
    "alpha0_re",
    "alpha0_im",
    "phi0",
    "phi",
    "s0",
    "d0",
    "witnesses",
    "t_max",
    "n_samples",
    "paths",
    "n_traj",
    "seed",
    "dt",
    "out",
    "dim",
];

/// Witnesses evaluable on a state with this many modes.
fn witness_supported(id: WitnessId, n_modes: usize) -> bool {
    match id {
        WitnessId::Sx | WitnessId::Sopt => n_modes == 1,
        WitnessId::Q1 => true,
        WitnessId::Q2 => n_modes == 2,
        _ => n_modes == 2,
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut seen: HashMap<&str, String> = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            bail!("line {}: expected key = value, got {body:?}", lineno + 1);
        };
        let key = key.trim();
        let value = value.trim();
        let Some(&canon) = KEYS.iter().find(|&&k| k == key) else {
            bail!("line {}: unknown key {key:?}", lineno + 1);
        };
        if seen.insert(canon, value.to_string()).is_some() {
            bail!("line {}: key {key:?} given twice", lineno + 1);
        }
    }

    let take = |key: &str| seen.get(key).cloned();
    let require = |key: &str| {
        take(key).with_context(|| format!("config is missing the {key:?} key"))
    };
    let float = |key: &str| -> Result<Option<f64>> {
        match take(key) {
            None => Ok(None),
            Some(v) => Ok(Some(
                v.parse::<f64>()
                    .with_context(|| format!("key {key:?}: bad number {v:?}"))?,
            )),
        }
    };

    let model_name = require("model")?;
    let model = Model::parse(&model_name)
        .with_context(|| format!("unknown model {model_name:?}"))?;
    let mut cfg = ModelConfig::new(model);
    if let Some(v) = float("gamma1")? {
        cfg.gamma[0] = v;
    }
    if let Some(v) = float("gamma2")? {
        cfg.gamma[1] = v;
    }
    if let Some(v) = float("nbar1")? {
        cfg.nbar[0] = v;
    }
    if let Some(v) = float("nbar2")? {
        cfg.nbar[1] = v;
    }
    if let Some(v) = float("kappa")? {
        cfg.kappa = v;
    }
    if let Some(v) = float("p")? {
        cfg.p = v;
    }
    let re = float("alpha0_re")?.unwrap_or(0.0);
    let im = float("alpha0_im")?.unwrap_or(0.0);
    cfg.alpha0 = C64::new(re, im);
    if let Some(v) = float("phi0")? {
        cfg.phi0 = v;
    }
    if let Some(v) = float("phi")? {
        cfg.phi = v;
    }
    if let Some(v) = float("s0")? {
        cfg.s0 = v;
    }
    if let Some(v) = float("d0")? {
        cfg.d0 = v;
    }
    if let Some(v) = take("dim") {
        let dim: usize = v
            .parse()
            .with_context(|| format!("key \"dim\": bad count {v:?}"))?;
        cfg.dim = Some(dim);
    }
    cfg.validate()?;

    let n_modes = model.n_modes();
    let mut witnesses = Vec::new();
    for name in require("witnesses")?.split(',') {
        let name = name.trim();
        let id = WitnessId::parse(name)
            .with_context(|| format!("unknown witness {name:?}"))?;
        if !witness_supported(id, n_modes) {
            bail!("witness {id} does not apply to a {n_modes}-mode model");
        }
        if witnesses.contains(&id) {
            bail!("witness {id} listed twice");
        }
        witnesses.push(id);
    }

    let mut paths = Vec::new();
    for name in require("paths")?.split(',') {
        let name = name.trim();
        let path = EvolutionPath::parse(name)
            .with_context(|| format!("unknown path {name:?}"))?;
        if paths.contains(&path) {
            bail!("path {name:?} listed twice");
        }
        paths.push(path);
    }

    let t_max = require("t_max")?
        .parse::<f64>()
        .context("key \"t_max\": bad number")?;
    let n_samples = require("n_samples")?
        .parse::<usize>()
        .context("key \"n_samples\": bad count")?;
    if n_samples < 2 {
        bail!("n_samples must be at least 2");
    }
    let n_traj = match take("n_traj") {
        None => 1000,
        Some(v) => v.parse().context("key \"n_traj\": bad count")?,
    };
    let seed = match take("seed") {
        None => 0,
        Some(v) => v.parse().context("key \"seed\": bad integer")?,
    };
    let dt = match float("dt")? {
        None => default_dt(&cfg),
        Some(v) if v > 0.0 && v.is_finite() => v,
        Some(v) => bail!("dt must be a positive step, got {v}"),
    };
    let out = PathBuf::from(take("out").unwrap_or_else(|| "out".into()));

    Ok(ScenarioConfig {
        model: cfg,
        witnesses,
        t_max,
        n_samples,
        paths,
        n_traj,
        seed,
        dt,
        out,
    })
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in config {}", path.display()))
}
