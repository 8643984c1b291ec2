//! Effective configuration: command-line flags override the `--config` file,
//! which overrides built-in defaults. Every resolved value is recorded so the
//! run can be echoed as a manifest.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use kfog::manifest::{Block, Manifest};
use kfog::PrecisionMode;

/// Environment variable supplying the default precision.
pub const PRECISION_ENV: &str = "KFOG_PRECISION";

const KNOWN_KEYS: &[&str] = &[
    "map", "mu", "gamma", "x0", "x0p", "precision", "k", "d", "transient", "n", "bins", "samples",
    "count", "format", "burn_in", "workers", "max_points", "full", "budget", "master_seed", "files",
    "ks", "gamma_range", "mu_range", "a", "b",
];

pub struct Resolver {
    file: Block,
    effective: Block,
}

impl Resolver {
    pub fn new(kind: &str, config: Option<&Path>) -> Result<Self> {
        let file = match config {
            Some(path) => {
                let m = Manifest::read(path)
                    .with_context(|| format!("reading config file {}", path.display()))?;
                if !m.entries.is_empty() {
                    bail!("config file {} must contain a single block", path.display());
                }
                for (k, _) in m.header.iter() {
                    if !KNOWN_KEYS.contains(&k) {
                        bail!("unknown key '{k}' in config file {}", path.display());
                    }
                }
                m.header
            }
            None => Block::new(),
        };
        let mut effective = kfog::prng::manifest_header(kind);
        if let Some(path) = config {
            effective.set("config", path.display());
        }
        Ok(Resolver { file, effective })
    }

    fn file_value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.file
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| anyhow::Error::new(kfog::Error::Invalid(format!("config value {key}={v} is malformed"))))
            })
            .transpose()
    }

    /// Flag, then config file, then `default`.
    pub fn value<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        let v = match flag {
            Some(v) => v,
            None => self.file_value(key)?.unwrap_or(default),
        };
        self.effective.set(key, &v);
        Ok(v)
    }

    /// Like [`value`](Self::value) without a default; unset keys are omitted
    /// from the manifest.
    pub fn optional<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let v = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        if let Some(v) = &v {
            self.effective.set(key, v);
        }
        Ok(v)
    }

    /// A switch that is on if either the flag or the config file turns it on.
    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool> {
        let v = flag || self.file_value::<bool>(key)?.unwrap_or(false);
        self.effective.set(key, v);
        Ok(v)
    }

    /// Precision: flag, config file, environment, then 512-bit extended.
    pub fn precision(&mut self, flag: Option<PrecisionMode>) -> Result<PrecisionMode> {
        let env = match std::env::var(PRECISION_ENV) {
            Ok(v) if !v.trim().is_empty() => Some(
                v.parse::<PrecisionMode>()
                    .with_context(|| format!("{PRECISION_ENV}={v}"))?,
            ),
            _ => None,
        };
        let file_value = self.file_value::<PrecisionMode>("precision")?;
        let v = flag.or(file_value).or(env).unwrap_or_default();
        self.effective.set("precision", v);
        Ok(v)
    }

    pub fn record(&mut self, key: &str, value: impl Display) {
        self.effective.set(key, value);
    }

    pub fn effective(&self) -> &Block {
        &self.effective
    }
}
