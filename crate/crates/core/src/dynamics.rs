//! Orbit generation, the deep-zoom transform, Lyapunov exponents and
//! two-orbit divergence traces.
//!
//! Iteration always runs on the raw map state. The deep-zoom shift
//! `frac(x * 10^k)` is applied to emitted values only and never fed back.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::maps::{MapCoeffs, MapKind, Params};
use crate::numerics::{with_precision, PhaseValue, PrecisionMode, Real, Seed};

/// Transient used by bifurcation-style analyses.
pub const DEFAULT_TRANSIENT: u64 = 200;
/// Transient used for frequency distributions and PRNG burn-in.
pub const DEFAULT_HISTOGRAM_TRANSIENT: u64 = 400;

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitSpec {
    pub map: MapKind,
    pub params: Params,
    pub x0: Seed,
    pub transient: u64,
    pub length: usize,
    pub k: u32,
    pub precision: PrecisionMode,
}

impl OrbitSpec {
    pub fn new(map: MapKind, params: Params, x0: Seed) -> Self {
        OrbitSpec {
            map,
            params,
            x0,
            transient: 0,
            length: 1,
            k: 0,
            precision: PrecisionMode::default(),
        }
    }

    pub fn transient(mut self, transient: u64) -> Self {
        self.transient = transient;
        self
    }

    pub fn length(mut self, length: usize) -> Self {
        self.length = length;
        self
    }

    pub fn zoom(mut self, k: u32) -> Self {
        self.k = k;
        self
    }

    pub fn precision(mut self, precision: PrecisionMode) -> Self {
        self.precision = precision;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.precision.validate()?;
        self.precision.check_zoom(self.k)?;
        if self.length == 0 {
            return Err(Error::invalid("orbit length must be positive"));
        }
        Ok(())
    }
}

/// Raw orbit state for one map at one precision.
#[derive(Clone, Debug)]
pub(crate) struct Orbit<R: Real> {
    map: MapKind,
    coeffs: MapCoeffs<R>,
    zero: R,
    x: R,
    steps: u64,
}

impl<R: Real> Orbit<R> {
    pub(crate) fn new(map: MapKind, params: &Params, x0: R, ctx: R::Ctx) -> Self {
        Orbit {
            map,
            coeffs: MapCoeffs::new(params, ctx),
            zero: R::from_f64_exact(ctx, 0.0),
            x: x0,
            steps: 0,
        }
    }

    pub(crate) fn from_seed(map: MapKind, params: &Params, seed: &Seed, ctx: R::Ctx) -> Result<Self> {
        Ok(Self::new(map, params, seed.value::<R>(ctx)?, ctx))
    }

    pub(crate) fn state(&self) -> &R {
        &self.x
    }

    /// Applies the map once. Maps that are not range-preserving report an
    /// escape instead of silently leaving the phase space.
    pub(crate) fn advance(&mut self) -> Result<&R> {
        let next = self.map.step(&self.x, &self.coeffs);
        self.steps += 1;
        if !self.map.preserves_unit_interval()
            && (!next.is_finite() || next.lt(&self.zero) || self.coeffs.one.lt(&next))
        {
            return Err(Error::Escaped {
                step: self.steps,
                value: next.to_f64(),
            });
        }
        self.x = next;
        Ok(&self.x)
    }

    pub(crate) fn skip(&mut self, n: u64) -> Result<()> {
        for _ in 0..n {
            self.advance()?;
        }
        Ok(())
    }

    pub(crate) fn deriv(&self) -> R {
        self.map.deriv(&self.x, &self.coeffs)
    }
}

/// `x -> frac(x * 10^k)` at a fixed precision.
#[derive(Clone, Debug)]
pub(crate) struct Zoom<R: Real> {
    scale: Option<R>,
}

impl<R: Real> Zoom<R> {
    pub(crate) fn new(k: u32, ctx: R::Ctx) -> Self {
        let scale = (k > 0).then(|| R::from_f64_exact(ctx, 10f64.powi(k as i32)));
        Zoom { scale }
    }

    pub(crate) fn apply(&self, x: &R) -> R {
        match &self.scale {
            None => x.clone(),
            Some(s) => x.mul(s).fract(),
        }
    }
}

/// Shifts `k` decimal digits out of `x`: `x*10^k - floor(x*10^k)`.
pub fn deep_zoom(x: &PhaseValue, k: u32) -> Result<PhaseValue> {
    let mode = x.mode();
    mode.check_zoom(k)?;
    Ok(match x {
        PhaseValue::Native(v) => PhaseValue::Native(Zoom::<f64>::new(k, ()).apply(v)),
        PhaseValue::Extended(e) => {
            let ctx = crate::numerics::ExtCtx::new(e.bits());
            PhaseValue::Extended(Zoom::new(k, ctx).apply(e))
        }
    })
}

/// Runs an orbit and hands each deep-zoomed emitted value to `emit`.
pub(crate) fn for_each_zoomed<R: Real>(
    spec: &OrbitSpec,
    ctx: R::Ctx,
    mut emit: impl FnMut(R),
) -> Result<()> {
    spec.validate()?;
    let mut orbit = Orbit::<R>::from_seed(spec.map, &spec.params, &spec.x0, ctx)?;
    let zoom = Zoom::<R>::new(spec.k, ctx);
    orbit.skip(spec.transient)?;
    for _ in 0..spec.length {
        let x = orbit.advance()?;
        emit(zoom.apply(x));
    }
    Ok(())
}

/// Values `x_{transient+1} .. x_{transient+length}`, each deep-zoomed by `k`.
pub fn iterate_orbit(spec: &OrbitSpec) -> Result<Vec<PhaseValue>> {
    let mut out = Vec::with_capacity(spec.length);
    with_precision!(spec.precision, |ctx: R| {
        for_each_zoomed::<R>(spec, ctx, |x| out.push(x.into_phase()))?
    });
    Ok(out)
}

/// Same as [`iterate_orbit`], rounded to `f64` for plotting and statistics.
pub fn iterate_orbit_f64(spec: &OrbitSpec) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(spec.length);
    with_precision!(spec.precision, |ctx: R| {
        for_each_zoomed::<R>(spec, ctx, |x| out.push(x.to_f64()))?
    });
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovEstimate {
    /// Nats per iteration.
    pub lambda: f64,
    /// Derivative terms actually summed.
    pub iterations: u64,
    /// Terms dropped because the derivative was exactly zero.
    pub skipped: u64,
    pub map: MapKind,
    pub params: Params,
}

/// `(1/T) * sum ln|h'(x_t)|` for `t = transient .. transient+T-1`.
///
/// A term whose derivative is exactly zero (the orbit sits on a critical
/// point) is skipped and `T` shrinks by one. If every term is skipped the
/// orbit is superstable and the estimate is [`Error::Degenerate`].
pub fn lyapunov(
    map: MapKind,
    params: &Params,
    x0: &Seed,
    transient: u64,
    iterations: u64,
    precision: PrecisionMode,
) -> Result<LyapunovEstimate> {
    if iterations == 0 {
        return Err(Error::invalid("Lyapunov estimate needs at least one iteration"));
    }
    precision.validate()?;
    let (sum, used, skipped) = with_precision!(precision, |ctx: R| {
        let mut orbit = Orbit::<R>::from_seed(map, params, x0, ctx)?;
        orbit.skip(transient)?;
        let mut sum = 0.0f64;
        let mut used = 0u64;
        let mut skipped = 0u64;
        for _ in 0..iterations {
            let d = orbit.deriv();
            if d.is_zero() {
                skipped += 1;
            } else {
                sum += d.to_f64().abs().ln();
                used += 1;
            }
            orbit.advance()?;
        }
        (sum, used, skipped)
    });
    if used == 0 {
        return Err(Error::Degenerate(format!(
            "every derivative along the {map} orbit is zero (superstable cycle)"
        )));
    }
    Ok(LyapunovEstimate {
        lambda: sum / used as f64,
        iterations: used,
        skipped,
        map,
        params: *params,
    })
}

/// Paired orbits from two nearby seeds, `x_1 .. x_steps`, without transient.
pub fn divergence_trace(
    map: MapKind,
    params: &Params,
    x0: &Seed,
    x0p: &Seed,
    steps: usize,
    precision: PrecisionMode,
) -> Result<Vec<(PhaseValue, PhaseValue)>> {
    precision.validate()?;
    if steps == 0 {
        return Err(Error::invalid("divergence trace needs at least one step"));
    }
    let mut out = Vec::with_capacity(steps);
    with_precision!(precision, |ctx: R| {
        let mut a = Orbit::<R>::from_seed(map, params, x0, ctx)?;
        let mut b = Orbit::<R>::from_seed(map, params, x0p, ctx)?;
        if a.state().cmp_real(b.state()) == std::cmp::Ordering::Equal {
            return Err(Error::Degenerate(format!(
                "seeds {x0} and {x0p} coincide at {precision}"
            )));
        }
        for _ in 0..steps {
            let xa = a.advance()?.clone();
            let xb = b.advance()?.clone();
            out.push((xa.into_phase(), xb.into_phase()));
        }
    });
    Ok(out)
}

/// Reproducible initial conditions for batch runs.
///
/// Draws seeds uniformly from `(1e-6, 1 - 1e-6)` with ChaCha8 seeded from a
/// recorded 64-bit master seed, and renders them with 16 decimals.
#[derive(Clone, Debug)]
pub struct SeedSource {
    master: u64,
    rng: ChaCha8Rng,
}

impl SeedSource {
    pub const MARGIN: f64 = 1e-6;

    pub fn new(master: u64) -> Self {
        SeedSource {
            master,
            rng: ChaCha8Rng::seed_from_u64(master),
        }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn next_seed(&mut self) -> Seed {
        let v: f64 = self.rng.gen_range(Self::MARGIN..1.0 - Self::MARGIN);
        Seed::new(format!("{v:.16}")).expect("seed drawn inside (0, 1)")
    }
}
