mod config;

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use kfog::analysis::{
    bifurcation_scan, cobweb_trace, frequency_histogram, lyapunov_curve, write_lyapunov_csv, Grid,
    SweepSpec, SweptParam, DEFAULT_BINS, DEFAULT_MAX_POINTS, DEFAULT_SWEEP_LENGTH,
};
use kfog::dynamics::{
    divergence_trace, iterate_orbit, lyapunov, OrbitSpec, DEFAULT_HISTOGRAM_TRANSIENT,
    DEFAULT_TRANSIENT,
};
use kfog::manifest::{Block, Manifest};
use kfog::prng::{
    jobs_from_manifest, run_jobs, write_stream, CorpusPlan, PrngConfig, StreamFormat, StreamJob,
    DEFAULT_BURN_IN, DEFAULT_GAMMA, DEFAULT_MU,
};
use kfog::randtests::{
    compare_generators, config_digest, run_battery, run_battery_on_sample, Sample, TestReport,
    MIN_BUDGET,
};
use kfog::{ErrorClass, MapKind, Params, PrecisionMode, Seed};

use config::Resolver;

#[derive(Parser)]
#[command(name = "kfog", version, about = "Composed chaotic maps, deep-zoom PRNG and randomness tests")]
struct Cli {
    /// key=value file with defaults for any option (flags take precedence).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads for sweeps and batch runs (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output file; standard output when omitted.
    #[arg(short, long, global = true, value_name = "FILE")]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Orbit values of a map, one per row.
    Orbit(OrbitArgs),
    /// Bifurcation samples over a parameter range.
    Bifurcation(BifurcationArgs),
    /// Lyapunov exponent at one parameter point or along a range.
    Lyapunov(LyapunovArgs),
    /// Frequency histogram of a deep-zoomed orbit.
    Histogram(HistogramArgs),
    /// Cobweb polyline of an orbit.
    Cobweb(CobwebArgs),
    /// Paired orbits from two nearby seeds.
    Diverge(DivergeArgs),
    /// Pseudo-random stream files.
    Prng(PrngArgs),
    /// Randomness test battery.
    Test(TestArgs),
}

#[derive(Args)]
struct MapArgs {
    /// logistic, tent, fog, gof or gof-as-printed.
    #[arg(long)]
    map: Option<MapKind>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Initial condition as a decimal string.
    #[arg(long)]
    x0: Option<Seed>,
    /// native or extended:BITS (default extended:512).
    #[arg(long)]
    precision: Option<PrecisionMode>,
}

#[derive(Args)]
struct OrbitArgs {
    #[command(flatten)]
    map: MapArgs,
    /// Deep-zoom exponent.
    #[arg(long)]
    k: Option<u32>,
    /// Number of rows.
    #[arg(long)]
    n: Option<Count>,
    #[arg(long)]
    transient: Option<Count>,
}

#[derive(Args)]
struct BifurcationArgs {
    #[command(flatten)]
    map: MapArgs,
    /// Sweep over Γ as lo:hi:step.
    #[arg(long, value_name = "LO:HI:STEP", conflicts_with = "mu_range")]
    gamma_range: Option<String>,
    /// Sweep over μ as lo:hi:step.
    #[arg(long, value_name = "LO:HI:STEP")]
    mu_range: Option<String>,
    #[arg(long)]
    k: Option<u32>,
    /// Orbit length per column.
    #[arg(long)]
    n: Option<Count>,
    #[arg(long)]
    transient: Option<Count>,
    /// Samples kept per column.
    #[arg(long)]
    max_points: Option<usize>,
    /// Keep every orbit sample.
    #[arg(long)]
    full: bool,
}

#[derive(Args)]
struct LyapunovArgs {
    #[command(flatten)]
    map: MapArgs,
    #[arg(long, value_name = "LO:HI:STEP", conflicts_with = "mu_range")]
    gamma_range: Option<String>,
    #[arg(long, value_name = "LO:HI:STEP")]
    mu_range: Option<String>,
    /// Terms in the average.
    #[arg(long)]
    n: Option<Count>,
    #[arg(long)]
    transient: Option<Count>,
}

#[derive(Args)]
struct HistogramArgs {
    #[command(flatten)]
    map: MapArgs,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    n: Option<Count>,
    #[arg(long)]
    transient: Option<Count>,
    #[arg(long)]
    bins: Option<usize>,
}

#[derive(Args)]
struct CobwebArgs {
    #[command(flatten)]
    map: MapArgs,
    /// Orbit steps.
    #[arg(long)]
    n: Option<Count>,
    /// Segments used to draw the map graph.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct DivergeArgs {
    #[command(flatten)]
    map: MapArgs,
    /// Second initial condition.
    #[arg(long)]
    x0p: Option<Seed>,
    #[arg(long)]
    n: Option<Count>,
}

#[derive(Args)]
struct GeneratorArgs {
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Seed as a decimal string.
    #[arg(long)]
    x0: Option<Seed>,
    #[arg(long)]
    precision: Option<PrecisionMode>,
    /// Digits per symbol.
    #[arg(long)]
    d: Option<u32>,
    #[arg(long)]
    burn_in: Option<Count>,
}

#[derive(Args)]
struct PrngArgs {
    #[arg(long)]
    map: Option<MapKind>,
    #[command(flatten)]
    gen: GeneratorArgs,
    #[arg(long)]
    k: Option<u32>,
    /// Symbols per file.
    #[arg(long)]
    count: Option<Count>,
    /// raw-le32, ascii-digits or csv-real.
    #[arg(long)]
    format: Option<StreamFormat>,
    /// Write the stream to standard output.
    #[arg(long, conflicts_with_all = ["ks", "files", "manifest"])]
    stdout: bool,
    /// Generate a corpus for these k values (e.g. 0:9 or 0,3,6).
    #[arg(long)]
    ks: Option<KList>,
    /// Files per k in a corpus.
    #[arg(long)]
    files: Option<usize>,
    /// Master seed for corpus seeds.
    #[arg(long)]
    master_seed: Option<u64>,
    /// Corpus directory.
    #[arg(long, value_name = "DIR")]
    dir: Option<PathBuf>,
    /// Regenerate every file listed in a manifest.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["ks", "files"])]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true)]
struct TestArgs {
    #[command(subcommand)]
    compare: Option<TestCommand>,
    #[arg(long)]
    map: Option<MapKind>,
    #[command(flatten)]
    gen: GeneratorArgs,
    #[arg(long)]
    k: Option<u32>,
    /// Symbols drawn from the generator.
    #[arg(long)]
    budget: Option<Count>,
    /// Test a raw-le32 file instead of a generator.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TestCommand {
    /// Signed-rank comparison of two generators' pass counts.
    Compare(CompareArgs),
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    a: Option<MapKind>,
    #[arg(long)]
    b: Option<MapKind>,
    #[command(flatten)]
    gen: GeneratorArgs,
    /// k values, e.g. 0:9.
    #[arg(long)]
    k: Option<KList>,
    /// Files per k and generator.
    #[arg(long)]
    files: Option<usize>,
    #[arg(long)]
    budget: Option<Count>,
    #[arg(long)]
    master_seed: Option<u64>,
}

/// Unsigned count that also accepts `1e6`-style input.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Count(u64);

impl FromStr for Count {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if let Ok(n) = s.parse::<u64>() {
            return Ok(Count(n));
        }
        match s.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(64) => Ok(Count(v as u64)),
            _ => Err(format!("expected a non-negative integer, got '{s}'")),
        }
    }
}

impl fmt::Display for Count {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `lo:hi` (inclusive) or a comma-separated list of k values.
#[derive(Clone, Debug, PartialEq)]
struct KList(Vec<u32>);

impl FromStr for KList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let bad = || format!("expected lo:hi or a comma list of k values, got '{s}'");
        let ks = if let Some((lo, hi)) = s.split_once(':') {
            let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
            let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(bad());
            }
            (lo..=hi).collect()
        } else {
            s.split(',')
                .map(|p| p.trim().parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad())?
        };
        Ok(KList(ks))
    }
}

impl fmt::Display for KList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(k) = cause.downcast_ref::<kfog::Error>() {
            return match k.class() {
                ErrorClass::Validation => 2,
                ErrorClass::Io => 3,
                ErrorClass::Degenerate => 4,
            };
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return 3;
        }
    }
    2
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        config: cli.config,
        workers: cli.workers,
        output: cli.output,
    };
    match cli.command {
        Command::Orbit(a) => cmd_orbit(&ctx, a),
        Command::Bifurcation(a) => cmd_bifurcation(&ctx, a),
        Command::Lyapunov(a) => cmd_lyapunov(&ctx, a),
        Command::Histogram(a) => cmd_histogram(&ctx, a),
        Command::Cobweb(a) => cmd_cobweb(&ctx, a),
        Command::Diverge(a) => cmd_diverge(&ctx, a),
        Command::Prng(a) => cmd_prng(&ctx, a),
        Command::Test(TestArgs {
            compare: Some(TestCommand::Compare(a)),
            ..
        }) => cmd_compare(&ctx, a),
        Command::Test(a) => cmd_test(&ctx, a),
    }
}

struct Ctx {
    config: Option<PathBuf>,
    workers: Option<usize>,
    output: Option<PathBuf>,
}

impl Ctx {
    fn resolver(&self, kind: &str) -> Result<Resolver> {
        let mut r = Resolver::new(kind, self.config.as_deref())?;
        if let Some(out) = &self.output {
            r.record("output", out.display());
        }
        Ok(r)
    }

    fn workers(&self, r: &mut Resolver) -> Result<usize> {
        r.value("workers", self.workers, 0)
    }

    fn open(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.output {
            Some(path) => Box::new(BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    /// Writes the effective configuration next to the output file, or to
    /// standard error when the data went to standard output.
    fn emit_manifest(&self, m: &Manifest) -> Result<()> {
        match &self.output {
            Some(path) => write_manifest(m, &sidecar(path)),
            None => {
                for line in m.to_string().lines() {
                    eprintln!("# {line}");
                }
                Ok(())
            }
        }
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

fn write_manifest(m: &Manifest, path: &Path) -> Result<()> {
    m.write(path)
        .with_context(|| format!("writing manifest {}", path.display()))
}

fn warn_if_quarantined(map: MapKind) {
    if !map.preserves_unit_interval() {
        eprintln!(
            "warning: {map} is the literal GoF formula, which can leave [0, 1]; use gof for the composition"
        );
    }
}

/// Map, parameters, seed and precision shared by the analysis commands.
struct Dyn {
    map: MapKind,
    params: Params,
    x0: Seed,
    precision: PrecisionMode,
}

fn resolve_dyn(r: &mut Resolver, a: MapArgs, default_x0: &str) -> Result<Dyn> {
    let map = r.value("map", a.map, MapKind::Fog)?;
    warn_if_quarantined(map);
    let mu = r.value("mu", a.mu, 4.0)?;
    let gamma = r.value("gamma", a.gamma, 2.0)?;
    let x0 = r.value("x0", a.x0, Seed::new(default_x0)?)?;
    let precision = r.precision(a.precision)?;
    Ok(Dyn {
        map,
        params: Params::new(mu, gamma)?,
        x0,
        precision,
    })
}

fn finish(ctx: &Ctx, r: &Resolver) -> Result<()> {
    ctx.emit_manifest(&Manifest::new(r.effective().clone()))
}

fn cmd_orbit(ctx: &Ctx, a: OrbitArgs) -> Result<()> {
    let mut r = ctx.resolver("orbit")?;
    let d = resolve_dyn(&mut r, a.map, "0.3")?;
    let k = r.value("k", a.k, 0)?;
    let n = r.value("n", a.n, Count(1000))?.0;
    let transient = r.value("transient", a.transient, Count(0))?.0;
    let spec = OrbitSpec::new(d.map, d.params, d.x0)
        .transient(transient)
        .length(usize::try_from(n)?)
        .zoom(k)
        .precision(d.precision);
    let orbit = iterate_orbit(&spec)?;
    let mut w = ctx.open()?;
    writeln!(w, "x")?;
    for x in &orbit {
        writeln!(w, "{:?}", x.to_f64())?;
    }
    w.flush()?;
    finish(ctx, &r)
}

fn resolve_sweep(
    r: &mut Resolver,
    d: &Dyn,
    gamma_range: Option<String>,
    mu_range: Option<String>,
) -> Result<Option<SweepSpec>> {
    let gamma_range = r.optional("gamma_range", gamma_range)?;
    let mu_range = r.optional("mu_range", mu_range)?;
    let (swept, fixed, text) = match (gamma_range, mu_range) {
        (Some(_), Some(_)) => bail!(kfog::Error::Invalid(
            "give either gamma_range or mu_range, not both".into()
        )),
        (Some(g), None) => (SweptParam::Gamma, d.params.mu(), g),
        (None, Some(m)) => (SweptParam::Mu, d.params.gamma(), m),
        (None, None) => return Ok(None),
    };
    let grid: Grid = text.parse()?;
    let mut spec = SweepSpec::new(d.map, swept, fixed, grid, d.x0.clone());
    spec.precision = d.precision;
    Ok(Some(spec))
}

fn cmd_bifurcation(ctx: &Ctx, a: BifurcationArgs) -> Result<()> {
    let mut r = ctx.resolver("bifurcation")?;
    let d = resolve_dyn(&mut r, a.map, "0.3")?;
    let Some(mut spec) = resolve_sweep(&mut r, &d, a.gamma_range, a.mu_range)? else {
        bail!(kfog::Error::Invalid("bifurcation needs --gamma-range or --mu-range".into()));
    };
    spec.k = r.value("k", a.k, 0)?;
    spec.length = usize::try_from(r.value("n", a.n, Count(DEFAULT_SWEEP_LENGTH as u64))?.0)?;
    spec.transient = r.value("transient", a.transient, Count(DEFAULT_TRANSIENT))?.0;
    let full = r.switch("full", a.full)?;
    let max_points = if full {
        None
    } else {
        Some(r.value("max_points", a.max_points, DEFAULT_MAX_POINTS)?)
    };
    let workers = ctx.workers(&mut r)?;
    eprintln!("sweeping {} columns", spec.grid.len());
    let table = bifurcation_scan(&spec, max_points, workers)?;
    let mut w = ctx.open()?;
    table.write_csv(&mut w)?;
    w.flush()?;
    finish(ctx, &r)
}

fn cmd_lyapunov(ctx: &Ctx, a: LyapunovArgs) -> Result<()> {
    let mut r = ctx.resolver("lyapunov")?;
    let d = resolve_dyn(&mut r, a.map, "0.3")?;
    let sweep = resolve_sweep(&mut r, &d, a.gamma_range, a.mu_range)?;
    let n = r.value("n", a.n, Count(DEFAULT_SWEEP_LENGTH as u64))?.0;
    let transient = r.value("transient", a.transient, Count(DEFAULT_TRANSIENT))?.0;
    match sweep {
        Some(mut spec) => {
            spec.length = usize::try_from(n)?;
            spec.transient = transient;
            let workers = ctx.workers(&mut r)?;
            eprintln!("sweeping {} points", spec.grid.len());
            let points = lyapunov_curve(&spec, workers)?;
            let mut w = ctx.open()?;
            write_lyapunov_csv(&points, &mut w)?;
            w.flush()?;
        }
        None => {
            let est = lyapunov(d.map, &d.params, &d.x0, transient, n, d.precision)?;
            let mut w = ctx.open()?;
            writeln!(w, "map,mu,gamma,lambda,iterations,skipped")?;
            writeln!(
                w,
                "{},{},{},{},{},{}",
                est.map,
                est.params.mu(),
                est.params.gamma(),
                est.lambda,
                est.iterations,
                est.skipped
            )?;
            w.flush()?;
        }
    }
    finish(ctx, &r)
}

fn cmd_histogram(ctx: &Ctx, a: HistogramArgs) -> Result<()> {
    let mut r = ctx.resolver("histogram")?;
    let d = resolve_dyn(&mut r, a.map, "0.3")?;
    let k = r.value("k", a.k, 0)?;
    let n = r.value("n", a.n, Count(DEFAULT_SWEEP_LENGTH as u64))?.0;
    let transient = r.value("transient", a.transient, Count(DEFAULT_HISTOGRAM_TRANSIENT))?.0;
    let bins = r.value("bins", a.bins, DEFAULT_BINS)?;
    let spec = OrbitSpec::new(d.map, d.params, d.x0)
        .transient(transient)
        .length(usize::try_from(n)?)
        .zoom(k)
        .precision(d.precision);
    let hist = frequency_histogram(&spec, bins)?;
    let mut w = ctx.open()?;
    hist.write_csv(&mut w)?;
    w.flush()?;
    finish(ctx, &r)
}

fn cmd_cobweb(ctx: &Ctx, a: CobwebArgs) -> Result<()> {
    let mut r = ctx.resolver("cobweb")?;
    let d = resolve_dyn(&mut r, a.map, "0.3")?;
    let n = r.value("n", a.n, Count(50))?.0;
    let samples = r.value("samples", a.samples, 200)?;
    let trace = cobweb_trace(d.map, &d.params, &d.x0, usize::try_from(n)?, samples, d.precision)?;
    let mut w = ctx.open()?;
    trace.write_csv(&mut w)?;
    w.flush()?;
    finish(ctx, &r)
}

fn cmd_diverge(ctx: &Ctx, a: DivergeArgs) -> Result<()> {
    let mut r = ctx.resolver("diverge")?;
    let d = resolve_dyn(&mut r, a.map, "0.80000000")?;
    let x0p = r.value("x0p", a.x0p, Seed::new("0.80000001")?)?;
    let n = r.value("n", a.n, Count(50))?.0;
    let trace = divergence_trace(d.map, &d.params, &d.x0, &x0p, usize::try_from(n)?, d.precision)?;
    let mut w = ctx.open()?;
    writeln!(w, "t,x,xp,delta")?;
    for (t, (x, xp)) in trace.iter().enumerate() {
        let (x, xp) = (x.to_f64(), xp.to_f64());
        writeln!(w, "{},{x:?},{xp:?},{:?}", t + 1, (x - xp).abs())?;
    }
    w.flush()?;
    finish(ctx, &r)
}

fn resolve_generator(r: &mut Resolver, map: MapKind, g: GeneratorArgs) -> Result<PrngConfig> {
    let mu = r.value("mu", g.mu, DEFAULT_MU)?;
    let gamma = r.value("gamma", g.gamma, DEFAULT_GAMMA)?;
    let seed = r.value("x0", g.x0, Seed::new("0.3")?)?;
    let precision = r.precision(g.precision)?;
    let d = r.value("d", g.d, 1)?;
    let burn_in = r.value("burn_in", g.burn_in, Count(DEFAULT_BURN_IN))?.0;
    Ok(PrngConfig {
        map,
        params: Params::new(mu, gamma)?,
        seed,
        k: 0,
        d,
        precision,
        burn_in,
    })
}

fn cmd_prng(ctx: &Ctx, a: PrngArgs) -> Result<()> {
    let mut r = ctx.resolver("prng")?;
    let workers = ctx.workers(&mut r)?;
    if let Some(path) = a.manifest {
        return replay(ctx, &mut r, &path, a.dir, workers);
    }
    let map = r.value("map", a.map, MapKind::Fog)?;
    warn_if_quarantined(map);
    let base = resolve_generator(&mut r, map, a.gen)?;
    let count = r.value("count", a.count, Count(MIN_BUDGET as u64))?.0;
    let format = r.value("format", a.format, StreamFormat::RawLe32)?;
    let ks = r.optional("ks", a.ks)?;
    let files = r.optional("files", a.files)?;

    if ks.is_some() || files.is_some() {
        let ks = match ks {
            Some(ks) => ks,
            None => KList(vec![r.value("k", a.k, 0)?]),
        };
        let files_per_k = files.unwrap_or(1);
        r.record("ks", &ks);
        r.record("files", files_per_k);
        let master_seed = r.value("master_seed", a.master_seed, 0)?;
        let Some(dir) = a.dir else {
            bail!(kfog::Error::Invalid("corpus generation needs --dir".into()));
        };
        r.record("dir", dir.display());
        let plan = CorpusPlan {
            base,
            ks: ks.0,
            files_per_k,
            count,
            format,
            master_seed,
        };
        let jobs = plan.jobs()?;
        eprintln!("generating {} files into {}", jobs.len(), dir.display());
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let m = jobs_manifest_with(r.effective(), &jobs);
        write_manifest(&m, &dir.join("manifest.txt"))?;
        let written = run_jobs(&jobs, &dir, workers)?;
        eprintln!("wrote {} files", written.len());
        return Ok(());
    }

    let config = base.with_k(r.value("k", a.k, 0)?);
    config.validate()?;
    if a.stdout {
        let mut w = BufWriter::new(io::stdout().lock());
        write_stream(&config, count, format, &mut w)?;
        w.flush()?;
        let job = StreamJob {
            file: "-".into(),
            config,
            count,
            format,
        };
        for line in jobs_manifest_with(r.effective(), &[job]).to_string().lines() {
            eprintln!("# {line}");
        }
        return Ok(());
    }
    let Some(out) = ctx.output.clone() else {
        bail!(kfog::Error::Invalid("prng needs --output FILE or --stdout".into()));
    };
    let job = StreamJob {
        file: out
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "stream".into()),
        config,
        count,
        format,
    };
    let dir = out.parent().unwrap_or(Path::new(""));
    let bytes = job.run(if dir.as_os_str().is_empty() { Path::new(".") } else { dir })?;
    eprintln!("wrote {bytes} bytes to {}", out.display());
    write_manifest(&jobs_manifest_with(r.effective(), &[job]), &sidecar(&out))
}

fn jobs_manifest_with(header: &Block, jobs: &[StreamJob]) -> Manifest {
    let mut m = Manifest::new(header.clone());
    m.entries = jobs.iter().map(StreamJob::to_block).collect();
    m
}

fn replay(ctx: &Ctx, r: &mut Resolver, path: &Path, dir: Option<PathBuf>, workers: usize) -> Result<()> {
    let m = Manifest::read(path).with_context(|| format!("reading manifest {}", path.display()))?;
    let jobs = jobs_from_manifest(&m)?;
    let dir = dir.unwrap_or_else(|| path.parent().unwrap_or(Path::new(".")).to_path_buf());
    r.record("manifest", path.display());
    r.record("dir", dir.display());
    if let Some(seed) = m.header.get("master_seed") {
        r.record("master_seed", seed);
    }
    eprintln!("regenerating {} files into {}", jobs.len(), dir.display());
    let written = run_jobs(&jobs, &dir, workers)?;
    eprintln!("wrote {} files", written.len());
    let out = jobs_manifest_with(r.effective(), &jobs);
    match &ctx.output {
        Some(p) => write_manifest(&out, p),
        None => write_manifest(&out, &dir.join("replay.manifest")),
    }
}

fn cmd_test(ctx: &Ctx, a: TestArgs) -> Result<()> {
    let mut r = ctx.resolver("test")?;
    let report = match a.input {
        Some(path) => {
            let d = r.value("d", a.gen.d, 1)?;
            r.record("input", path.display());
            test_file(&path, d)?
        }
        None => {
            let map = r.value("map", a.map, MapKind::Fog)?;
            warn_if_quarantined(map);
            let k = r.value("k", a.k, 0)?;
            let config = resolve_generator(&mut r, map, a.gen)?.with_k(k);
            let budget = r.value("budget", a.budget, Count(MIN_BUDGET as u64))?.0;
            config.validate()?;
            eprintln!("drawing {budget} symbols");
            run_battery(&config, usize::try_from(budget)?)?
        }
    };
    r.record("digest", &report.digest);
    write_report(ctx, &report)?;
    finish(ctx, &r)
}

fn test_file(path: &Path, d: u32) -> Result<TestReport> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .with_context(|| format!("reading {}", path.display()))?;
    if bytes.len() % 4 != 0 {
        bail!(kfog::Error::Invalid(format!(
            "{} is not a whole number of 32-bit words",
            path.display()
        )));
    }
    if !(1..=kfog::prng::MAX_D).contains(&d) {
        bail!(kfog::Error::Invalid(format!("d must be in 1..={}, got {d}", kfog::prng::MAX_D)));
    }
    let words: Vec<u32> = bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let digest = config_digest(&format!("input={}\nwords={}\nd={d}\n", path.display(), words.len()));
    Ok(run_battery_on_sample(&Sample::from_words(words, d), digest)?)
}

fn write_report(ctx: &Ctx, report: &TestReport) -> Result<()> {
    let mut w = ctx.open()?;
    report.write_csv(&mut w)?;
    w.flush()?;
    eprint!("{}", report.summary());
    Ok(())
}

fn cmd_compare(ctx: &Ctx, a: CompareArgs) -> Result<()> {
    let mut r = ctx.resolver("test-compare")?;
    let map_a = r.value("a", a.a, MapKind::Fog)?;
    let map_b = r.value("b", a.b, MapKind::Logistic)?;
    warn_if_quarantined(map_a);
    warn_if_quarantined(map_b);
    let base = resolve_generator(&mut r, map_a, a.gen)?;
    let ks = r.value("ks", a.k, KList((0..=9).collect()))?;
    let files = r.value("files", a.files, 10)?;
    let budget = r.value("budget", a.budget, Count(MIN_BUDGET as u64))?.0;
    let master_seed = r.value("master_seed", a.master_seed, 0)?;
    let workers = ctx.workers(&mut r)?;
    for k in &ks.0 {
        base.clone().with_k(*k).validate()?;
    }
    let cfg_b = base.clone().with_map(map_b);
    eprintln!("running {} batteries", 2 * ks.0.len() * files);
    let budget = usize::try_from(budget)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let cmp = pool.install(|| compare_generators(&base, &cfg_b, &ks.0, files, budget, master_seed))?;
    let mut w = ctx.open()?;
    cmp.write_csv(&mut w)?;
    w.flush()?;
    finish(ctx, &r)
}
