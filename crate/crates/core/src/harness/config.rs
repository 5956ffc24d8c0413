//! Flat `key = value` configuration with named presets and overrides.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::alert::{rule_registry, AlertConfig, ReadoutSchedule};
use crate::embedder::{MlpConfig, TimeEncodingConfig};
use crate::error::{Error, Result};
use crate::events::{SampleMode, SyntheticConfig};
use crate::grid::GridConfig;
use crate::head::HeadConfig;

pub const PRESETS: [&str; 3] = ["default", "lmm", "rm"];

/// Every knob of a run. The token width of the head and the time-encoding
/// input dimension are derived, not set.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub grid: GridConfig,
    pub te: TimeEncodingConfig,
    pub mlp: MlpConfig,
    pub alert: AlertConfig,
    pub head: HeadConfig,
    pub readout: ReadoutSchedule,
    pub sample: SampleMode,
    pub gen: SyntheticConfig,
    pub seed: u64,
    pub nva_window: usize,
    /// Weight archive; random weights from `seed` when absent.
    pub weights: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        let mut c = Config {
            grid: GridConfig {
                sensor_width: 128,
                sensor_height: 128,
                patch_w: 8,
                patch_h: 8,
                activation_threshold: 2,
            },
            te: TimeEncodingConfig::default(),
            mlp: MlpConfig {
                depth: 2,
                base_channels: 32,
                expansion: 2.0,
                out_channels: 64,
                input_dim: 5,
                final_relu: false,
            },
            alert: AlertConfig {
                lambda: 0.01,
                n_threshold: 1024,
                k: 1,
                activation_threshold: 2,
                counter_mode: "global_step".into(),
            },
            head: HeadConfig {
                layers: 2,
                heads: 4,
                token_width: 64,
                mlp_ratio: 2,
                num_classes: 2,
                use_class_token: true,
                final_norm: true,
            },
            readout: ReadoutSchedule::EveryMicros(10_000),
            sample: SampleMode::Ccim { ne: 8192 },
            gen: SyntheticConfig::default(),
            seed: 0,
            nva_window: 10,
            weights: None,
        };
        c.sync();
        c
    }
}

impl Config {
    pub fn preset(name: &str) -> Result<Self> {
        let mut c = Config::default();
        match name {
            "default" => {}
            "lmm" => {
                c.mlp.depth = 2;
                c.mlp.base_channels = 12;
                c.mlp.out_channels = 128;
                c.head.layers = 2;
                c.head.heads = 4;
                c.head.mlp_ratio = 4;
            }
            "rm" => {
                c.mlp.depth = 5;
                c.mlp.base_channels = 80;
                c.mlp.expansion = 2.0;
                c.mlp.out_channels = 512;
                c.head.layers = 4;
                c.head.heads = 8;
                c.head.mlp_ratio = 4;
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown preset {other:?}, expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        }
        c.sync();
        Ok(c)
    }

    /// Resolves `source` as a preset name, else as a config file path.
    pub fn load(source: &str) -> Result<Self> {
        if PRESETS.contains(&source) {
            return Config::preset(source);
        }
        let path = Path::new(source);
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text)
    }

    /// Parses config text. A `preset` line selects the base; every other
    /// line overrides it, in order.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = split_pair(line).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
            lines.push((i + 1, k, v));
        }
        let base = lines.iter().find(|(_, k, _)| k == "preset").map(|(_, _, v)| v.as_str());
        let mut cfg = Config::preset(base.unwrap_or("default"))?;
        for (lineno, k, v) in lines.iter().filter(|(_, k, _)| k != "preset") {
            cfg.set(k, v).map_err(|e| Error::Config(format!("line {lineno}: {}", strip_prefix(&e))))?;
        }
        Ok(cfg)
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, pair: &str) -> Result<()> {
        let (k, v) = split_pair(pair).map_err(Error::Config)?;
        self.set(&k, &v)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "sensor.width" => self.grid.sensor_width = parse(key, value)?,
            "sensor.height" => self.grid.sensor_height = parse(key, value)?,
            "grid.patch_w" => self.grid.patch_w = parse(key, value)?,
            "grid.patch_h" => self.grid.patch_h = parse(key, value)?,
            "grid.activation_threshold" => self.grid.activation_threshold = parse(key, value)?,
            "te.alpha" => self.te.alpha = parse(key, value)?,
            "te.f_hz" => self.te.f_hz = parse(key, value)?,
            "te.phi" => self.te.phi = parse(key, value)?,
            "te.enabled" => self.te.enabled = parse(key, value)?,
            "mlp.depth" => self.mlp.depth = parse(key, value)?,
            "mlp.base_channels" => self.mlp.base_channels = parse(key, value)?,
            "mlp.expansion" => self.mlp.expansion = parse(key, value)?,
            "mlp.out_channels" => self.mlp.out_channels = parse(key, value)?,
            "mlp.final_relu" => self.mlp.final_relu = parse(key, value)?,
            "alert.lambda" => self.alert.lambda = parse(key, value)?,
            "alert.n_threshold" => self.alert.n_threshold = parse(key, value)?,
            "alert.k" => self.alert.k = parse(key, value)?,
            "alert.counter_mode" => {
                if !rule_registry().contains(value) {
                    let names: Vec<_> = rule_registry().names().collect();
                    return Err(Error::Config(format!(
                        "alert.counter_mode: unknown {value:?}, expected one of {}",
                        names.join(", ")
                    )));
                }
                self.alert.counter_mode = value.to_string();
            }
            "head.layers" => self.head.layers = parse(key, value)?,
            "head.heads" => self.head.heads = parse(key, value)?,
            "head.mlp_ratio" => self.head.mlp_ratio = parse(key, value)?,
            "head.num_classes" => self.head.num_classes = parse(key, value)?,
            "head.use_class_token" => self.head.use_class_token = parse(key, value)?,
            "head.final_norm" => self.head.final_norm = parse(key, value)?,
            "readout.every_us" => self.readout = ReadoutSchedule::EveryMicros(parse(key, value)?),
            "readout.every_events" => self.readout = ReadoutSchedule::EveryEvents(parse(key, value)?),
            "readout.final" => {
                if parse::<bool>(key, value)? {
                    self.readout = ReadoutSchedule::Final;
                }
            }
            "sample.mode" => {
                self.sample = match value {
                    "ccim" => SampleMode::Ccim { ne: 8192 },
                    "ctim" => SampleMode::Ctim { delta_t: 130_000 },
                    _ => return Err(Error::Config(format!("sample.mode: expected ccim or ctim, got {value:?}"))),
                }
            }
            "sample.ne" => self.sample = SampleMode::Ccim { ne: parse(key, value)? },
            "sample.delta_t_us" => self.sample = SampleMode::Ctim { delta_t: parse(key, value)? },
            "gen.rate_hz" => self.gen.rate_hz = parse(key, value)?,
            "gen.duration_us" => self.gen.duration_us = parse(key, value)?,
            "gen.blobs" => self.gen.blobs = parse(key, value)?,
            "gen.class_id" => self.gen.class_id = parse(key, value)?,
            "gen.blob_sigma" => self.gen.blob_sigma = parse(key, value)?,
            "gen.speed_px_per_s" => self.gen.speed_px_per_s = parse(key, value)?,
            "gen.noise" => self.gen.noise = parse(key, value)?,
            "gen.start_us" => self.gen.start_us = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "eval.nva_window" => self.nva_window = parse(key, value)?,
            "weights" => self.weights = Some(PathBuf::from(value)),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        self.sync();
        Ok(())
    }

    /// Re-derives fields that mirror other settings.
    fn sync(&mut self) {
        self.mlp.input_dim = if self.te.enabled { 5 } else { 4 };
        self.head.token_width = self.mlp.out_channels;
        self.alert.activation_threshold = self.grid.activation_threshold;
        self.gen.sensor_width = self.grid.sensor_width;
        self.gen.sensor_height = self.grid.sensor_height;
        self.gen.num_classes = self.head.num_classes;
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.te.validate()?;
        self.mlp.validate()?;
        self.alert.validate()?;
        rule_registry().create(&self.alert.counter_mode, &())?;
        self.head.validate()?;
        self.readout.validate()?;
        if self.nva_window == 0 {
            return Err(Error::Config("eval.nva_window must be >= 1".into()));
        }
        if self.gen.class_id >= self.gen.num_classes {
            return Err(Error::Config(format!(
                "gen.class_id {} out of range for {} classes",
                self.gen.class_id, self.gen.num_classes
            )));
        }
        Ok(())
    }

    /// Canonical `key=value` listing; parses back to the same config.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("sensor.width", self.grid.sensor_width.to_string());
        kv("sensor.height", self.grid.sensor_height.to_string());
        kv("grid.patch_w", self.grid.patch_w.to_string());
        kv("grid.patch_h", self.grid.patch_h.to_string());
        kv("grid.activation_threshold", self.grid.activation_threshold.to_string());
        kv("te.alpha", self.te.alpha.to_string());
        kv("te.f_hz", self.te.f_hz.to_string());
        kv("te.phi", self.te.phi.to_string());
        kv("te.enabled", self.te.enabled.to_string());
        kv("mlp.depth", self.mlp.depth.to_string());
        kv("mlp.base_channels", self.mlp.base_channels.to_string());
        kv("mlp.expansion", self.mlp.expansion.to_string());
        kv("mlp.out_channels", self.mlp.out_channels.to_string());
        kv("mlp.final_relu", self.mlp.final_relu.to_string());
        kv("alert.lambda", self.alert.lambda.to_string());
        kv("alert.n_threshold", self.alert.n_threshold.to_string());
        kv("alert.k", self.alert.k.to_string());
        kv("alert.counter_mode", self.alert.counter_mode.clone());
        kv("head.layers", self.head.layers.to_string());
        kv("head.heads", self.head.heads.to_string());
        kv("head.mlp_ratio", self.head.mlp_ratio.to_string());
        kv("head.num_classes", self.head.num_classes.to_string());
        kv("head.use_class_token", self.head.use_class_token.to_string());
        kv("head.final_norm", self.head.final_norm.to_string());
        match self.readout {
            ReadoutSchedule::EveryMicros(dt) => kv("readout.every_us", dt.to_string()),
            ReadoutSchedule::EveryEvents(n) => kv("readout.every_events", n.to_string()),
            ReadoutSchedule::Final => kv("readout.final", "true".into()),
        }
        match self.sample {
            SampleMode::Ccim { ne } => kv("sample.ne", ne.to_string()),
            SampleMode::Ctim { delta_t } => kv("sample.delta_t_us", delta_t.to_string()),
        }
        kv("gen.rate_hz", self.gen.rate_hz.to_string());
        kv("gen.duration_us", self.gen.duration_us.to_string());
        kv("gen.blobs", self.gen.blobs.to_string());
        kv("gen.class_id", self.gen.class_id.to_string());
        kv("gen.blob_sigma", self.gen.blob_sigma.to_string());
        kv("gen.speed_px_per_s", self.gen.speed_px_per_s.to_string());
        kv("gen.noise", self.gen.noise.to_string());
        kv("gen.start_us", self.gen.start_us.to_string());
        kv("seed", self.seed.to_string());
        kv("eval.nva_window", self.nva_window.to_string());
        if let Some(w) = &self.weights {
            kv("weights", w.display().to_string());
        }
        s
    }
}

fn split_pair(s: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() {
        return Err(format!("empty key in {s:?}"));
    }
    Ok((k.to_string(), v.to_string()))
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}
