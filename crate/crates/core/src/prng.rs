//! The k-map pseudo-random generator.
//!
//! A [`RandomStream`] iterates a map at fixed precision, deep-zooms every
//! value by `k` decimal digits and discretizes it either to a `d`-digit
//! decimal symbol `floor(x * 10^d)` or to a 32-bit word holding the first 32
//! binary fraction bits of `x`.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::dynamics::{Orbit, SeedSource, Zoom, DEFAULT_HISTOGRAM_TRANSIENT};
use crate::error::{Error, Result};
use crate::manifest::{Block, Manifest};
use crate::maps::{MapKind, Params};
use crate::numerics::{scaled_floor, ExtCtx, ExtFloat, PhaseValue, PrecisionMode, Real, Seed};

pub const DEFAULT_MU: f64 = 3.99999999;
pub const DEFAULT_GAMMA: f64 = 1.99999999;
pub const DEFAULT_BURN_IN: u64 = DEFAULT_HISTOGRAM_TRANSIENT;
pub const MAX_K: u32 = 11;
/// Symbols must fit in a `u32`.
pub const MAX_D: u32 = 9;
/// Characters per line in the `ascii-digits` format.
pub const ASCII_LINE: usize = 80;

#[derive(Clone, Debug, PartialEq)]
pub struct PrngConfig {
    pub map: MapKind,
    pub params: Params,
    pub seed: Seed,
    pub k: u32,
    pub d: u32,
    pub precision: PrecisionMode,
    pub burn_in: u64,
}

impl PrngConfig {
    /// FoG with `mu = 3.99999999`, `gamma = 1.99999999`, `k = 0`, `d = 1`,
    /// 512-bit arithmetic and a 400-step burn-in.
    pub fn new(seed: Seed) -> Self {
        PrngConfig {
            map: MapKind::Fog,
            params: Params::new(DEFAULT_MU, DEFAULT_GAMMA).expect("defaults in range"),
            seed,
            k: 0,
            d: 1,
            precision: PrecisionMode::default(),
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn with_map(mut self, map: MapKind) -> Self {
        self.map = map;
        self
    }

    pub fn with_k(mut self, k: u32) -> Self {
        self.k = k;
        self
    }

    pub fn with_d(mut self, d: u32) -> Self {
        self.d = d;
        self
    }

    pub fn with_precision(mut self, precision: PrecisionMode) -> Self {
        self.precision = precision;
        self
    }

    pub fn with_seed(mut self, seed: Seed) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k > MAX_K {
            return Err(Error::invalid(format!("k must be in 0..={MAX_K}, got {}", self.k)));
        }
        if !(1..=MAX_D).contains(&self.d) {
            return Err(Error::invalid(format!("d must be in 1..={MAX_D}, got {}", self.d)));
        }
        self.precision.validate()?;
        self.precision.check_zoom(self.k)
    }

    pub fn write_block(&self, b: &mut Block) {
        b.set("map", self.map)
            .set("mu", format!("{:?}", self.params.mu()))
            .set("gamma", format!("{:?}", self.params.gamma()))
            .set("seed", &self.seed)
            .set("k", self.k)
            .set("d", self.d)
            .set("precision", self.precision)
            .set("burn_in", self.burn_in);
    }

    pub fn from_block(b: &Block) -> Result<Self> {
        let seed = Seed::new(b.require("seed")?)?;
        let base = PrngConfig::new(seed);
        let mu = b.parse::<f64>("mu")?.unwrap_or(DEFAULT_MU);
        let gamma = b.parse::<f64>("gamma")?.unwrap_or(DEFAULT_GAMMA);
        let config = PrngConfig {
            map: b.parse::<MapKind>("map")?.unwrap_or(base.map),
            params: Params::new(mu, gamma)?,
            k: b.parse("k")?.unwrap_or(base.k),
            d: b.parse("d")?.unwrap_or(base.d),
            precision: b.parse("precision")?.unwrap_or(base.precision),
            burn_in: b.parse("burn_in")?.unwrap_or(base.burn_in),
            seed: base.seed,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Clone, Debug)]
struct Generator<R: Real> {
    orbit: Orbit<R>,
    zoom: Zoom<R>,
    ctx: R::Ctx,
}

impl<R: Real> Generator<R> {
    fn new(config: &PrngConfig, ctx: R::Ctx) -> Result<Self> {
        let mut orbit = Orbit::from_seed(config.map, &config.params, &config.seed, ctx)?;
        orbit.skip(config.burn_in)?;
        Ok(Generator {
            orbit,
            zoom: Zoom::new(config.k, ctx),
            ctx,
        })
    }

    fn next(&mut self) -> Result<R> {
        let x = self.orbit.advance()?;
        Ok(self.zoom.apply(x))
    }

    fn discretize(&self, x: &R, d: u32) -> (u32, u32) {
        (scaled_floor(x, self.ctx, d) as u32, x.frac_bits(32) as u32)
    }
}

#[derive(Clone, Debug)]
enum Engine {
    Native(Generator<f64>),
    Extended(Generator<ExtFloat>),
}

/// Deterministic stream of deep-zoomed orbit values.
#[derive(Clone, Debug)]
pub struct RandomStream {
    config: PrngConfig,
    position: u64,
    engine: Engine,
}

impl RandomStream {
    /// Validates the configuration and runs the burn-in.
    pub fn new(config: PrngConfig) -> Result<Self> {
        config.validate()?;
        let engine = match config.precision {
            PrecisionMode::Native => Engine::Native(Generator::new(&config, ())?),
            PrecisionMode::Extended(bits) => {
                Engine::Extended(Generator::new(&config, ExtCtx::new(bits))?)
            }
        };
        Ok(RandomStream {
            config,
            position: 0,
            engine,
        })
    }

    pub fn config(&self) -> &PrngConfig {
        &self.config
    }

    /// Values emitted so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    /// Advances the orbit once and returns `frac(x_n * 10^k)`.
    pub fn next_value(&mut self) -> Result<PhaseValue> {
        self.position += 1;
        Ok(match &mut self.engine {
            Engine::Native(g) => g.next()?.into_phase(),
            Engine::Extended(g) => g.next()?.into_phase(),
        })
    }

    /// `floor(x_n^k * 10^d)`.
    pub fn next_digit(&mut self) -> Result<u32> {
        self.next_symbols().map(|(digit, _)| digit)
    }

    /// First 32 binary fraction bits of `x_n^k`.
    pub fn next_word32(&mut self) -> Result<u32> {
        self.next_symbols().map(|(_, word)| word)
    }

    /// Both discretizations of the same underlying value.
    pub fn next_symbols(&mut self) -> Result<(u32, u32)> {
        self.position += 1;
        let d = self.config.d;
        match &mut self.engine {
            Engine::Native(g) => {
                let x = g.next()?;
                Ok(g.discretize(&x, d))
            }
            Engine::Extended(g) => {
                let x = g.next()?;
                Ok(g.discretize(&x, d))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamFormat {
    /// Little-endian 32-bit words.
    RawLe32,
    /// One `d`-digit zero-padded symbol each, 80 characters per line,
    /// trailing newline.
    AsciiDigits,
    /// `x` header then one deep-zoomed value per line.
    CsvReal,
}

impl StreamFormat {
    pub fn id(&self) -> &'static str {
        match self {
            StreamFormat::RawLe32 => "raw-le32",
            StreamFormat::AsciiDigits => "ascii-digits",
            StreamFormat::CsvReal => "csv-real",
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            StreamFormat::RawLe32 => "bin",
            StreamFormat::AsciiDigits => "txt",
            StreamFormat::CsvReal => "csv",
        }
    }
}

impl fmt::Display for StreamFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for StreamFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "raw-le32" => Ok(StreamFormat::RawLe32),
            "ascii-digits" => Ok(StreamFormat::AsciiDigits),
            "csv-real" => Ok(StreamFormat::CsvReal),
            other => Err(Error::invalid(format!(
                "unknown format '{other}' (expected raw-le32, ascii-digits or csv-real)"
            ))),
        }
    }
}

/// Writes exactly `count` symbols and returns the number of bytes written.
pub fn write_stream(
    config: &PrngConfig,
    count: u64,
    format: StreamFormat,
    sink: impl Write,
) -> Result<u64> {
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    let mut stream = RandomStream::new(config.clone())?;
    let mut w = CountingWriter::new(BufWriter::with_capacity(1 << 16, sink));
    match format {
        StreamFormat::RawLe32 => {
            for _ in 0..count {
                w.write_all(&stream.next_word32()?.to_le_bytes())?;
            }
        }
        StreamFormat::AsciiDigits => {
            let width = config.d as usize;
            let mut column = 0usize;
            let mut buf = String::with_capacity(16);
            for _ in 0..count {
                buf.clear();
                use fmt::Write as _;
                write!(buf, "{:0width$}", stream.next_digit()?).expect("string write");
                for ch in buf.bytes() {
                    w.write_all(&[ch])?;
                    column += 1;
                    if column == ASCII_LINE {
                        w.write_all(b"\n")?;
                        column = 0;
                    }
                }
            }
            if column != 0 {
                w.write_all(b"\n")?;
            }
        }
        StreamFormat::CsvReal => {
            writeln!(w, "x")?;
            for _ in 0..count {
                writeln!(w, "{:?}", stream.next_value()?.to_f64())?;
            }
        }
    }
    w.flush()?;
    Ok(w.written)
}

struct CountingWriter<W: Write> {
    inner: W,
    written: u64,
}

impl<W: Write> CountingWriter<W> {
    fn new(inner: W) -> Self {
        CountingWriter { inner, written: 0 }
    }
}

impl<W: Write> Write for CountingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.written += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// One file to generate: a configuration, a symbol count and a format.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamJob {
    pub file: String,
    pub config: PrngConfig,
    pub count: u64,
    pub format: StreamFormat,
}

impl StreamJob {
    pub fn to_block(&self) -> Block {
        let mut b = Block::new();
        b.set("file", &self.file);
        self.config.write_block(&mut b);
        b.set("count", self.count).set("format", self.format);
        b
    }

    pub fn from_block(b: &Block) -> Result<Self> {
        Ok(StreamJob {
            file: b.require("file")?.to_string(),
            config: PrngConfig::from_block(b)?,
            count: b
                .parse("count")?
                .ok_or_else(|| Error::invalid("manifest entry is missing 'count'"))?,
            format: b.parse("format")?.unwrap_or(StreamFormat::RawLe32),
        })
    }

    pub fn run(&self, dir: &Path) -> Result<u64> {
        let path = dir.join(&self.file);
        let file = File::create(&path)?;
        write_stream(&self.config, self.count, self.format, file)
    }
}

pub fn manifest_header(kind: &str) -> Block {
    let mut b = Block::new();
    b.set("kind", kind)
        .set("generator", concat!("kfog ", env!("CARGO_PKG_VERSION")));
    b
}

pub fn jobs_manifest(kind: &str, jobs: &[StreamJob], extra: &[(&str, String)]) -> Manifest {
    let mut header = manifest_header(kind);
    for (k, v) in extra {
        header.set(k, v);
    }
    let mut m = Manifest::new(header);
    m.entries = jobs.iter().map(StreamJob::to_block).collect();
    m
}

pub fn jobs_from_manifest(m: &Manifest) -> Result<Vec<StreamJob>> {
    if m.entries.is_empty() {
        return Err(Error::invalid("manifest lists no files"));
    }
    m.entries.iter().map(StreamJob::from_block).collect()
}

/// Plan for a multi-file corpus: `files_per_k` files for each `k`, each with
/// a fresh seed drawn from a [`SeedSource`].
#[derive(Clone, Debug)]
pub struct CorpusPlan {
    pub base: PrngConfig,
    pub ks: Vec<u32>,
    pub files_per_k: usize,
    pub count: u64,
    pub format: StreamFormat,
    pub master_seed: u64,
}

impl CorpusPlan {
    /// Resolves seeds (in `k`-major order) and file names.
    pub fn jobs(&self) -> Result<Vec<StreamJob>> {
        if self.files_per_k == 0 || self.ks.is_empty() {
            return Err(Error::invalid("corpus needs at least one k and one file per k"));
        }
        let mut seeds = SeedSource::new(self.master_seed);
        let mut jobs = Vec::with_capacity(self.ks.len() * self.files_per_k);
        for &k in &self.ks {
            for i in 0..self.files_per_k {
                let config = self.base.clone().with_k(k).with_seed(seeds.next_seed());
                config.validate()?;
                jobs.push(StreamJob {
                    file: format!("{}_k{k:02}_{i:03}.{}", config.map, self.format.extension()),
                    config,
                    count: self.count,
                    format: self.format,
                });
            }
        }
        Ok(jobs)
    }

    pub fn manifest(&self) -> Result<Manifest> {
        Ok(jobs_manifest(
            "prng-corpus",
            &self.jobs()?,
            &[("master_seed", self.master_seed.to_string())],
        ))
    }
}

/// Generates every job into `dir` using `workers` threads (0 = all cores).
/// Output bytes do not depend on the worker count.
pub fn run_jobs(jobs: &[StreamJob], dir: &Path, workers: usize) -> Result<Vec<(PathBuf, u64)>> {
    std::fs::create_dir_all(dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|job| Ok((dir.join(&job.file), job.run(dir)?)))
            .collect()
    })
}
