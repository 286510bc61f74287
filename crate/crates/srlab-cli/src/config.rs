//! Flat key=value run configuration for `train`.
//!
//! Lines are `key = value`; `#` starts a comment. Unknown keys are rejected
//! so typos fail loudly instead of silently training with defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use srlab::eval::ModelSpace;
use srlab::model::NetworkConfig;
use srlab::resample::DegradeMode;
use srlab::train::{Strategy, TrainConfig};
use srlab::{Error, Result};

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub strategy: Option<Strategy>,
    pub val_dir: Option<PathBuf>,
    pub checkpoint_every: u64,
    pub model_space: ModelSpace,
    /// Whether the file set fsub explicitly (checked against the archive).
    pub f_sub_set: bool,
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::Config(format!("bad value '{}' for key '{}'", value, key)))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|p| parse_num::<T>(key, p.trim()))
        .collect()
}

pub fn parse_degrade_mode(value: &str) -> Result<DegradeMode> {
    if value == "bicubic" {
        return Ok(DegradeMode::BicubicDownUp);
    }
    if let Some(sigma) = value.strip_prefix("gaussian:") {
        let sigma: f64 = sigma
            .parse()
            .map_err(|_| Error::Config(format!("bad gaussian sigma '{}'", sigma)))?;
        return Ok(DegradeMode::GaussianDecimateUp { sigma });
    }
    Err(Error::Config(format!(
        "unknown degrade mode '{}' (expected bicubic or gaussian:SIGMA)",
        value
    )))
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_run_config(&text)
}

pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let mut channels = 1usize;
    let mut layers = String::from("9-1-5");
    let mut filters: Vec<usize> = vec![64, 32];
    let mut scale = 3usize;
    let mut f_sub: Option<usize> = None;
    let mut stride = 14usize;
    let mut batch_size = 128usize;
    let mut momentum = 0.9f64;
    let mut lr: Option<Vec<f64>> = None;
    let mut total_backprops = 1_000_000u64;
    let mut pretrain_backprops = 0u64;
    let mut seed = 1u64;
    let mut channel_weights: Option<Vec<f64>> = None;
    let mut degrade = DegradeMode::BicubicDownUp;
    let mut validate_every = 500_000u64;
    let mut checkpoint_every = 500_000u64;
    let mut strategy: Option<Strategy> = None;
    let mut val_dir: Option<PathBuf> = None;
    let mut model_space: Option<ModelSpace> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "channels" => channels = parse_num(key, value)?,
            "layers" => layers = value.to_string(),
            "filters" => filters = parse_list(key, value)?,
            "scale" => scale = parse_num(key, value)?,
            "fsub" => f_sub = Some(parse_num(key, value)?),
            "stride" => stride = parse_num(key, value)?,
            "batch_size" => batch_size = parse_num(key, value)?,
            "momentum" => momentum = parse_num(key, value)?,
            "lr" => lr = Some(parse_list(key, value)?),
            "total_backprops" => total_backprops = parse_num(key, value)?,
            "pretrain_backprops" => pretrain_backprops = parse_num(key, value)?,
            "seed" => seed = parse_num(key, value)?,
            "channel_weights" => channel_weights = Some(parse_list(key, value)?),
            "degrade" => degrade = parse_degrade_mode(value)?,
            "validate_every" => validate_every = parse_num(key, value)?,
            "checkpoint_every" => checkpoint_every = parse_num(key, value)?,
            "strategy" => strategy = Some(value.parse::<Strategy>()?),
            "val_dir" => val_dir = Some(PathBuf::from(value)),
            "model_space" => model_space = Some(value.parse::<ModelSpace>()?),
            other => {
                return Err(Error::Config(format!(
                    "unknown config key '{}' (line {})",
                    other,
                    lineno + 1
                )))
            }
        }
    }

    if let Some(s) = strategy {
        if s.channels() != channels {
            return Err(Error::Config(format!(
                "strategy needs channels = {}, config says {}",
                s.channels(),
                channels
            )));
        }
    }
    let network = NetworkConfig::from_notation(&layers, &filters, channels)?;
    let n_layers = network.layers().len();
    let mut train = TrainConfig::defaults(scale, n_layers);
    train.stride = stride;
    train.batch_size = batch_size;
    train.momentum = momentum;
    train.total_backprops = total_backprops;
    train.pretrain_backprops = pretrain_backprops;
    train.seed = seed;
    train.degrade_mode = degrade;
    train.validate_every = validate_every;
    if let Some(f) = f_sub {
        train.f_sub = f;
    }
    if let Some(lr) = lr {
        train.lr_per_layer = lr;
    }
    train.channel_weights = match channel_weights {
        Some(w) => w,
        None => vec![1.0; channels],
    };
    let model_space = match (model_space, strategy, channels) {
        (Some(s), _, _) => s,
        (None, Some(s), _) => s.sample_space(),
        (None, None, 1) => ModelSpace::Luminance,
        (None, None, _) => {
            return Err(Error::Config(
                "3-channel runs need 'model_space = ycbcr|rgb' (or a strategy)".into(),
            ))
        }
    };
    train.validate(&network)?;
    Ok(RunConfig {
        network,
        train,
        strategy,
        val_dir,
        checkpoint_every,
        model_space,
        f_sub_set: f_sub.is_some(),
    })
}
