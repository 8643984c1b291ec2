//! Parameter sweeps and plot-ready tables: bifurcation diagrams, Lyapunov
//! curves, frequency histograms and cobweb traces.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dynamics::{self, OrbitSpec, DEFAULT_TRANSIENT};
use crate::error::{Error, Result};
use crate::maps::{MapCoeffs, MapKind, Params};
use crate::numerics::{with_precision, PrecisionMode, Real, Seed};

/// Half-width of the band treated as `lambda = 0` when classifying.
pub const ZERO_BAND: f64 = 1e-3;
pub const DEFAULT_BINS: usize = 500;
pub const DEFAULT_MAX_POINTS: usize = 500;
pub const DEFAULT_SWEEP_LENGTH: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweptParam {
    Mu,
    Gamma,
}

impl SweptParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweptParam::Mu => "mu",
            SweptParam::Gamma => "gamma",
        }
    }

    fn max(&self) -> f64 {
        match self {
            SweptParam::Mu => Params::MU_MAX,
            SweptParam::Gamma => Params::GAMMA_MAX,
        }
    }
}

impl fmt::Display for SweptParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Inclusive `lo..=hi` grid with a fixed step. Points are `lo + i*step` for
/// integer `i`; `hi` is part of the grid only when it lies on it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
            return Err(Error::invalid("sweep bounds must be finite"));
        }
        if step <= 0.0 {
            return Err(Error::invalid(format!("sweep step must be positive, got {step}")));
        }
        if lo >= hi {
            return Err(Error::invalid(format!("sweep requires lo < hi, got {lo}..{hi}")));
        }
        Ok(Grid { lo, hi, step })
    }

    pub fn len(&self) -> usize {
        // The epsilon keeps 0..2 step 0.5 at 5 points despite rounding in the ratio.
        ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.lo + i as f64 * self.step)
    }
}

impl FromStr for Grid {
    type Err = Error;

    /// `lo:hi:step`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::invalid(format!("expected lo:hi:step, got '{s}'")))?;
        match parts.as_slice() {
            [lo, hi, step] => Grid::new(*lo, *hi, *step),
            _ => Err(Error::invalid(format!("expected lo:hi:step, got '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub map: MapKind,
    pub swept: SweptParam,
    /// Value of the parameter that is held fixed.
    pub fixed: f64,
    pub grid: Grid,
    pub x0: Seed,
    pub transient: u64,
    pub length: usize,
    pub k: u32,
    pub precision: PrecisionMode,
}

impl SweepSpec {
    pub fn new(map: MapKind, swept: SweptParam, fixed: f64, grid: Grid, x0: Seed) -> Self {
        SweepSpec {
            map,
            swept,
            fixed,
            grid,
            x0,
            transient: DEFAULT_TRANSIENT,
            length: DEFAULT_SWEEP_LENGTH,
            k: 0,
            precision: PrecisionMode::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let max = self.swept.max();
        if self.grid.lo < 0.0 || self.grid.hi > max {
            return Err(Error::invalid(format!(
                "{} sweep {}..{} leaves [0, {max}]",
                self.swept, self.grid.lo, self.grid.hi
            )));
        }
        self.params_at(self.grid.lo)?;
        self.precision.validate()?;
        self.precision.check_zoom(self.k)?;
        if self.length == 0 {
            return Err(Error::invalid("sweep orbit length must be positive"));
        }
        Ok(())
    }

    pub fn params_at(&self, v: f64) -> Result<Params> {
        match self.swept {
            SweptParam::Mu => Params::new(v, self.fixed),
            SweptParam::Gamma => Params::new(self.fixed, v),
        }
    }

    pub fn orbit_at(&self, v: f64) -> Result<OrbitSpec> {
        Ok(OrbitSpec {
            map: self.map,
            params: self.params_at(v)?,
            x0: self.x0.clone(),
            transient: self.transient,
            length: self.length,
            k: self.k,
            precision: self.precision,
        })
    }
}

/// Runs `f` over the grid in parallel, returning results in grid order.
fn sweep<T: Send>(
    spec: &SweepSpec,
    workers: usize,
    f: impl Fn(f64) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    spec.validate()?;
    let points: Vec<f64> = spec.grid.points().collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| points.par_iter().map(|&v| f(v)).collect())
}

/// One column of a bifurcation diagram.
#[derive(Clone, Debug, PartialEq)]
pub struct BifurcationColumn {
    pub param: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BifurcationTable {
    pub swept: SweptParam,
    pub columns: Vec<BifurcationColumn>,
}

impl BifurcationTable {
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "param,x")?;
        for col in &self.columns {
            for x in &col.values {
                writeln!(w, "{},{}", col.param, x)?;
            }
        }
        Ok(())
    }
}

/// Post-transient orbit samples per parameter value. `max_points` bounds the
/// samples kept per column by uniform striding; `None` keeps full orbits.
/// `workers = 0` uses all cores.
pub fn bifurcation_scan(
    spec: &SweepSpec,
    max_points: Option<usize>,
    workers: usize,
) -> Result<BifurcationTable> {
    if max_points == Some(0) {
        return Err(Error::invalid("max points per column must be positive"));
    }
    let columns = sweep(spec, workers, |v| {
        let orbit = dynamics::iterate_orbit_f64(&spec.orbit_at(v)?)?;
        let values = match max_points {
            Some(cap) if orbit.len() > cap => {
                let stride = orbit.len().div_ceil(cap);
                orbit.into_iter().step_by(stride).collect()
            }
            _ => orbit,
        };
        Ok(BifurcationColumn { param: v, values })
    })?;
    Ok(BifurcationTable {
        swept: spec.swept,
        columns,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LyapunovClass {
    Negative,
    Zero,
    Positive,
}

impl LyapunovClass {
    pub fn of(lambda: f64) -> Self {
        if lambda.abs() < ZERO_BAND {
            LyapunovClass::Zero
        } else if lambda < 0.0 {
            LyapunovClass::Negative
        } else {
            LyapunovClass::Positive
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LyapunovClass::Negative => "negative",
            LyapunovClass::Zero => "zero",
            LyapunovClass::Positive => "positive",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovPoint {
    pub param: f64,
    pub lambda: f64,
    pub class: LyapunovClass,
}

pub fn write_lyapunov_csv(points: &[LyapunovPoint], mut w: impl Write) -> Result<()> {
    writeln!(w, "param,lambda,class")?;
    for p in points {
        writeln!(w, "{},{},{}", p.param, p.lambda, p.class.name())?;
    }
    Ok(())
}

/// Lyapunov exponent for plotting: a superstable orbit (every derivative
/// exactly zero) is reported as negative infinity instead of an error.
pub fn lyapunov_value(
    map: MapKind,
    params: &Params,
    x0: &Seed,
    transient: u64,
    iterations: u64,
    precision: PrecisionMode,
) -> Result<f64> {
    match dynamics::lyapunov(map, params, x0, transient, iterations, precision) {
        Ok(est) => Ok(est.lambda),
        Err(Error::Degenerate(_)) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// `lambda` at every grid point, with `T = spec.length` terms after
/// `spec.transient`.
pub fn lyapunov_curve(spec: &SweepSpec, workers: usize) -> Result<Vec<LyapunovPoint>> {
    sweep(spec, workers, |v| {
        let lambda = lyapunov_value(
            spec.map,
            &spec.params_at(v)?,
            &spec.x0,
            spec.transient,
            spec.length as u64,
            spec.precision,
        )?;
        Ok(LyapunovPoint {
            param: v,
            lambda,
            class: LyapunovClass::of(lambda),
        })
    })
}

/// Uniform-bin histogram over `[0, 1]`; the value 1 falls in the last bin.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    counts: Vec<u64>,
    total: u64,
}

impl Histogram {
    pub fn new(bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::invalid(format!("histogram needs at least 2 bins, got {bins}")));
        }
        Ok(Histogram {
            counts: vec![0; bins],
            total: 0,
        })
    }

    pub fn add(&mut self, x: f64) {
        let bins = self.counts.len();
        let i = ((x * bins as f64) as usize).min(bins - 1);
        self.counts[i] += 1;
        self.total += 1;
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `(lo, hi)` edges of bin `i`.
    pub fn edges(&self, i: usize) -> (f64, f64) {
        let n = self.counts.len() as f64;
        (i as f64 / n, (i + 1) as f64 / n)
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "bin_lo,bin_hi,count")?;
        for (i, c) in self.counts.iter().enumerate() {
            let (lo, hi) = self.edges(i);
            writeln!(w, "{lo},{hi},{c}")?;
        }
        Ok(())
    }
}

/// Frequency distribution of the deep-zoomed orbit described by `spec`.
pub fn frequency_histogram(spec: &OrbitSpec, bins: usize) -> Result<Histogram> {
    let mut hist = Histogram::new(bins)?;
    with_precision!(spec.precision, |ctx: R| {
        dynamics::for_each_zoomed::<R>(spec, ctx, |x| hist.add(x.to_f64()))?
    });
    Ok(hist)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegmentKind {
    /// The iteration path.
    Web,
    /// A chord of the sampled map graph.
    Curve,
    /// The identity line.
    Diagonal,
}

impl SegmentKind {
    pub fn name(&self) -> &'static str {
        match self {
            SegmentKind::Web => "web",
            SegmentKind::Curve => "curve",
            SegmentKind::Diagonal => "diagonal",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub from: (f64, f64),
    pub to: (f64, f64),
    pub kind: SegmentKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CobwebTrace {
    pub web: Vec<Segment>,
    pub curve: Vec<Segment>,
    pub diagonal: Segment,
}

impl CobwebTrace {
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "x0,y0,x1,y1,kind")?;
        for s in self.web.iter().chain(&self.curve).chain(std::iter::once(&self.diagonal)) {
            writeln!(w, "{},{},{},{},{}", s.from.0, s.from.1, s.to.0, s.to.1, s.kind.name())?;
        }
        Ok(())
    }
}

/// Cobweb polyline starting on the diagonal at `(x0, x0)`: for each step a
/// vertical segment to `(x_t, x_{t+1})` then a horizontal one to
/// `(x_{t+1}, x_{t+1})`. The map graph is sampled at `curve_samples + 1`
/// evenly spaced points.
pub fn cobweb_trace(
    map: MapKind,
    params: &Params,
    x0: &Seed,
    steps: usize,
    curve_samples: usize,
    precision: PrecisionMode,
) -> Result<CobwebTrace> {
    precision.validate()?;
    let (orbit, curve) = with_precision!(precision, |ctx: R| {
        let mut orbit = dynamics::Orbit::<R>::from_seed(map, params, x0, ctx)?;
        let mut xs = Vec::with_capacity(steps + 1);
        xs.push(orbit.state().to_f64());
        for _ in 0..steps {
            xs.push(orbit.advance()?.to_f64());
        }
        let coeffs = MapCoeffs::<R>::new(params, ctx);
        let n = curve_samples.max(1);
        let graph: Vec<(f64, f64)> = (0..=n)
            .map(|i| {
                let x = i as f64 / n as f64;
                let y = map.step(&R::from_f64_exact(ctx, x), &coeffs).to_f64();
                (x, y)
            })
            .collect();
        (xs, graph)
    });

    let mut web = Vec::with_capacity(2 * steps);
    for pair in orbit.windows(2) {
        let (x, y) = (pair[0], pair[1]);
        web.push(Segment {
            from: (x, x),
            to: (x, y),
            kind: SegmentKind::Web,
        });
        web.push(Segment {
            from: (x, y),
            to: (y, y),
            kind: SegmentKind::Web,
        });
    }
    let curve = curve
        .windows(2)
        .map(|w| Segment {
            from: w[0],
            to: w[1],
            kind: SegmentKind::Curve,
        })
        .collect();
    Ok(CobwebTrace {
        web,
        curve,
        diagonal: Segment {
            from: (0.0, 0.0),
            to: (1.0, 1.0),
            kind: SegmentKind::Diagonal,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(s: &str) -> Seed {
        Seed::new(s).unwrap()
    }

    #[test]
    fn grid_counts() {
        assert_eq!(Grid::new(0.0, 2.0, 0.003).unwrap().len(), 667);
        assert_eq!(Grid::new(0.0, 2.0, 0.5).unwrap().len(), 5);
        let g: Grid = "1.2:2.0:0.1".parse().unwrap();
        let pts: Vec<f64> = g.points().collect();
        assert_eq!(pts.len(), 9);
        assert!((pts[8] - 2.0).abs() < 1e-12);
        assert!(Grid::new(1.0, 1.0, 0.1).is_err());
        assert!(Grid::new(0.0, 1.0, 0.0).is_err());
        assert!("1:2".parse::<Grid>().is_err());
    }

    #[test]
    fn sweep_rejects_out_of_domain() {
        let spec = SweepSpec::new(MapKind::Fog, SweptParam::Gamma, 4.0, Grid::new(0.0, 2.5, 0.1).unwrap(), seed("0.3"));
        assert!(bifurcation_scan(&spec, None, 1).is_err());
        let spec = SweepSpec::new(MapKind::Fog, SweptParam::Mu, 2.5, Grid::new(0.0, 4.0, 0.1).unwrap(), seed("0.3"));
        assert!(lyapunov_curve(&spec, 1).is_err());
    }

    #[test]
    fn bifurcation_downsamples() {
        let mut spec = SweepSpec::new(MapKind::Fog, SweptParam::Gamma, 4.0, Grid::new(1.9, 2.0, 0.05).unwrap(), seed("0.3"));
        spec.length = 2000;
        spec.precision = PrecisionMode::Native;
        let t = bifurcation_scan(&spec, Some(500), 2).unwrap();
        assert_eq!(t.columns.len(), 3);
        assert!(t.columns.iter().all(|c| c.values.len() == 500));
        let full = bifurcation_scan(&spec, None, 2).unwrap();
        assert!(full.columns.iter().all(|c| c.values.len() == 2000));
        assert_eq!(full.columns[1].values[0], t.columns[1].values[0]);
        assert_eq!(full.columns[1].values[4], t.columns[1].values[1]);
    }

    #[test]
    fn histogram_constant_orbit_single_bin() {
        // FoG(3.1, 2) settles on a fixed point, so every sample lands in one bin.
        let spec = OrbitSpec::new(MapKind::Fog, Params::new(3.1, 2.0).unwrap(), seed("0.3"))
            .transient(400)
            .length(10_000)
            .precision(PrecisionMode::Native);
        let h = frequency_histogram(&spec, 500).unwrap();
        assert_eq!(h.total(), 10_000);
        assert_eq!(h.counts().iter().filter(|&&c| c > 0).count(), 1);
    }

    #[test]
    fn histogram_edges_and_last_bin() {
        let mut h = Histogram::new(4).unwrap();
        h.add(1.0);
        h.add(0.0);
        h.add(0.25);
        assert_eq!(h.counts(), &[1, 1, 0, 1]);
        assert_eq!(h.edges(3), (0.75, 1.0));
        assert!(Histogram::new(1).is_err());
    }

    #[test]
    fn cobweb_logistic_two_steps() {
        let t = cobweb_trace(MapKind::Logistic, &Params::new(4.0, 2.0).unwrap(), &seed("0.5"), 2, 10, PrecisionMode::Native).unwrap();
        assert_eq!(t.web.len(), 4);
        let corners: Vec<(f64, f64)> = t.web.iter().map(|s| s.to).collect();
        assert!(corners.contains(&(0.5, 1.0)));
        assert!(corners.contains(&(1.0, 0.0)));
        assert_eq!(t.curve.len(), 10);
        assert_eq!(t.curve[5].from, (0.5, 1.0));
    }

    #[test]
    fn cobweb_zero_steps_is_empty() {
        let t = cobweb_trace(MapKind::Fog, &Params::new(4.0, 2.0).unwrap(), &seed("0.3"), 0, 10, PrecisionMode::Native).unwrap();
        assert!(t.web.is_empty());
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x0,y0,x1,y1,kind\n"));
        assert!(text.trim_end().ends_with("diagonal"));
    }

    #[test]
    fn lyapunov_class_bands() {
        assert_eq!(LyapunovClass::of(0.0005), LyapunovClass::Zero);
        assert_eq!(LyapunovClass::of(-0.0005), LyapunovClass::Zero);
        assert_eq!(LyapunovClass::of(-0.5), LyapunovClass::Negative);
        assert_eq!(LyapunovClass::of(f64::NEG_INFINITY), LyapunovClass::Negative);
        assert_eq!(LyapunovClass::of(0.7), LyapunovClass::Positive);
    }
}
