//! Tunable settings: defaults, then `key = value` config files, then flags.

use std::str::FromStr;

use fracblind::{BoundaryMode, PipelineConfig};

use crate::CliError;

pub const KEYS: &[&str] = &[
    "kernel_size",
    "lambda",
    "alpha",
    "gamma1",
    "gamma2",
    "sigma",
    "boundary",
    "seed",
    "noise",
    "scale",
    "inner_iters",
    "taps",
    "truncation_factor",
    "finisher_ratio",
    "kernel_prune",
    "recenter",
    "recenter_floor",
];

/// Every setting is optional so layers can be merged.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub kernel_size: Option<usize>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub sigma: Option<f64>,
    pub boundary: Option<BoundaryMode>,
    pub seed: Option<u64>,
    pub noise: Option<f64>,
    pub scale: Option<f64>,
    pub inner_iters: Option<usize>,
    pub taps: Option<usize>,
    /// 0 disables truncation.
    pub truncation_factor: Option<f64>,
    pub finisher_ratio: Option<f64>,
    pub kernel_prune: Option<f64>,
    pub recenter: Option<bool>,
    pub recenter_floor: Option<f64>,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| CliError::Config(format!("invalid value '{value}' for '{key}'")))
}

impl Overrides {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "kernel_size" => self.kernel_size = Some(parse(key, value)?),
            "lambda" => self.lambda = Some(parse(key, value)?),
            "alpha" => self.alpha = Some(parse(key, value)?),
            "gamma1" => self.gamma1 = Some(parse(key, value)?),
            "gamma2" => self.gamma2 = Some(parse(key, value)?),
            "sigma" => self.sigma = Some(parse(key, value)?),
            "boundary" => {
                self.boundary = Some(value.parse().map_err(|e| CliError::Config(format!("boundary: {e}")))?)
            }
            "seed" => self.seed = Some(parse(key, value)?),
            "noise" => self.noise = Some(parse(key, value)?),
            "scale" => self.scale = Some(parse(key, value)?),
            "inner_iters" => self.inner_iters = Some(parse(key, value)?),
            "taps" => self.taps = Some(parse(key, value)?),
            "truncation_factor" => self.truncation_factor = Some(parse(key, value)?),
            "finisher_ratio" => self.finisher_ratio = Some(parse(key, value)?),
            "kernel_prune" => self.kernel_prune = Some(parse(key, value)?),
            "recenter" => self.recenter = Some(parse(key, value)?),
            "recenter_floor" => self.recenter_floor = Some(parse(key, value)?),
            _ => {
                return Err(CliError::Config(format!("unknown key '{key}'; valid keys: {}", KEYS.join(", "))));
            }
        }
        Ok(())
    }

    /// Values from `other` win where present.
    pub fn merged(&self, other: &Overrides) -> Overrides {
        macro_rules! pick {
            ($($f:ident),*) => { Overrides { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            kernel_size,
            lambda,
            alpha,
            gamma1,
            gamma2,
            sigma,
            boundary,
            seed,
            noise,
            scale,
            inner_iters,
            taps,
            truncation_factor,
            finisher_ratio,
            kernel_prune,
            recenter,
            recenter_floor
        )
    }

    pub fn pipeline(&self) -> PipelineConfig<f64> {
        let mut cfg = PipelineConfig::<f64>::default();
        if let Some(v) = self.kernel_size {
            cfg.kernel_size = v;
        }
        if let Some(v) = self.lambda {
            cfg.kernel.order = v;
        }
        if let Some(v) = self.alpha {
            cfg.kernel.alpha = v;
        }
        if let Some(v) = self.gamma1 {
            cfg.latent.gamma1 = v;
        }
        if let Some(v) = self.gamma2 {
            cfg.kernel.gamma2 = v;
        }
        if let Some(v) = self.sigma {
            cfg.latent.sigma = v;
        }
        if let Some(v) = self.scale {
            cfg.scale = v;
        }
        if let Some(v) = self.inner_iters {
            cfg.inner_iters = v;
        }
        if let Some(v) = self.taps {
            cfg.kernel.taps = v;
        }
        if let Some(v) = self.truncation_factor {
            cfg.kernel.truncation_factor = (v > 0.0).then_some(v);
        }
        if let Some(v) = self.finisher_ratio {
            cfg.finisher_ratio = v;
        }
        if let Some(v) = self.kernel_prune {
            cfg.kernel_prune = v;
        }
        if let Some(v) = self.recenter {
            cfg.recenter_kernel = v;
        }
        if let Some(v) = self.recenter_floor {
            cfg.recenter_floor = v;
        }
        cfg
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Overrides, CliError> {
    let mut out = Overrides::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected 'key = value', got '{line}'", n + 1)))?;
        out.set(key.trim(), value.trim()).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("line {}: {m}", n + 1)),
            other => other,
        })?;
    }
    Ok(out)
}

pub fn load_config(path: &std::path::Path) -> Result<Overrides, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.display().to_string(), source })?;
    parse_config(&text)
}
