//! The logistic map `f`, the tent map `g`, their compositions `f∘g` (FoG)
//! and `g∘f` (GoF), and analytic derivatives.
//!
//! Branches split at `x = 1/2`; the point itself takes the right branch.
//! At that point the true derivative of the tent-based maps does not exist and
//! the right-branch expression is returned.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::Real;

/// Control parameters: `mu` for the logistic map, `gamma` for the tent map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Params {
    mu: f64,
    gamma: f64,
}

impl Params {
    pub const MU_MAX: f64 = 4.0;
    pub const GAMMA_MAX: f64 = 2.0;

    pub fn new(mu: f64, gamma: f64) -> Result<Self> {
        check_range("mu", mu, Self::MU_MAX)?;
        check_range("gamma", gamma, Self::GAMMA_MAX)?;
        Ok(Params { mu, gamma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

fn check_range(name: &'static str, v: f64, max: f64) -> Result<()> {
    if v.is_finite() && (0.0..=max).contains(&v) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what: name,
            value: v.to_string(),
            range: if name == "mu" { "[0, 4]" } else { "[0, 2]" },
        })
    }
}

/// Which reading of the GoF formula to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GofVariant {
    /// Exact `g(f(x))`.
    Corrected,
    /// Literal transcription of the published piecewise formula, branching on
    /// `x` rather than on `f(x)`. Not range-preserving; kept for comparison.
    AsPrinted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MapKind {
    Logistic,
    Tent,
    Fog,
    Gof,
    GofAsPrinted,
}

impl MapKind {
    pub const ALL: [MapKind; 5] = [
        MapKind::Logistic,
        MapKind::Tent,
        MapKind::Fog,
        MapKind::Gof,
        MapKind::GofAsPrinted,
    ];

    /// Stable identifier used by the CLI and manifests.
    pub fn id(&self) -> &'static str {
        match self {
            MapKind::Logistic => "logistic",
            MapKind::Tent => "tent",
            MapKind::Fog => "fog",
            MapKind::Gof => "gof",
            MapKind::GofAsPrinted => "gof-as-printed",
        }
    }

    /// Whether the map sends `[0, 1]` into itself for every legal parameter.
    pub fn preserves_unit_interval(&self) -> bool {
        !matches!(self, MapKind::GofAsPrinted)
    }

    pub fn step<R: Real>(&self, x: &R, c: &MapCoeffs<R>) -> R {
        match self {
            MapKind::Logistic => logistic_step(x, c),
            MapKind::Tent => tent_step(x, c),
            MapKind::Fog => fog_step(x, c),
            MapKind::Gof => gof_step(x, c, GofVariant::Corrected),
            MapKind::GofAsPrinted => gof_step(x, c, GofVariant::AsPrinted),
        }
    }

    pub fn deriv<R: Real>(&self, x: &R, c: &MapCoeffs<R>) -> R {
        match self {
            MapKind::Logistic => logistic_deriv(x, c),
            MapKind::Tent => tent_deriv(x, c),
            MapKind::Fog => fog_deriv(x, c),
            MapKind::Gof => gof_deriv(x, c, GofVariant::Corrected),
            MapKind::GofAsPrinted => gof_deriv(x, c, GofVariant::AsPrinted),
        }
    }

    /// The control parameter that matters for a single map, used to label
    /// one-dimensional sweeps. Composite maps report `None`.
    pub fn sole_parameter(&self) -> Option<&'static str> {
        match self {
            MapKind::Logistic => Some("mu"),
            MapKind::Tent => Some("gamma"),
            _ => None,
        }
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for MapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MapKind::ALL
            .into_iter()
            .find(|m| m.id() == s.trim())
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown map '{s}' (expected logistic, tent, fog, gof or gof-as-printed)"
                ))
            })
    }
}

/// Parameters and constants lifted to a concrete precision.
#[derive(Clone, Debug)]
pub struct MapCoeffs<R: Real> {
    pub mu: R,
    pub gamma: R,
    pub one: R,
    pub two: R,
    pub half: R,
}

impl<R: Real> MapCoeffs<R> {
    /// Parameters are lifted through their shortest decimal representation,
    /// so `3.99999999` is exactly the decimal value at extended precision.
    pub fn new(params: &Params, ctx: R::Ctx) -> Self {
        let lift = |v: f64| {
            R::parse_decimal(ctx, &format!("{v:?}")).unwrap_or_else(|| R::from_f64_exact(ctx, v))
        };
        MapCoeffs {
            mu: lift(params.mu),
            gamma: lift(params.gamma),
            one: R::from_f64_exact(ctx, 1.0),
            two: R::from_f64_exact(ctx, 2.0),
            half: R::from_f64_exact(ctx, 0.5),
        }
    }
}

/// `mu * x * (1 - x)`.
pub fn logistic_step<R: Real>(x: &R, c: &MapCoeffs<R>) -> R {
    c.mu.mul(x).mul(&c.one.sub(x))
}

/// `gamma * x` left of 1/2, `gamma * (1 - x)` from 1/2 on.
pub fn tent_step<R: Real>(x: &R, c: &MapCoeffs<R>) -> R {
    if x.lt(&c.half) {
        c.gamma.mul(x)
    } else {
        c.gamma.mul(&c.one.sub(x))
    }
}

/// `f(g(x))`: `mu*G*x*(1 - G*x)` for `x < 1/2`, else
/// `mu*G*(1-x)*(1 - G*(1-x))`.
pub fn fog_step<R: Real>(x: &R, c: &MapCoeffs<R>) -> R {
    logistic_step(&tent_step(x, c), c)
}

pub fn gof_step<R: Real>(x: &R, c: &MapCoeffs<R>, variant: GofVariant) -> R {
    match variant {
        GofVariant::Corrected => tent_step(&logistic_step(x, c), c),
        GofVariant::AsPrinted => {
            let y = logistic_step(x, c);
            if x.lt(&c.half) {
                c.gamma.mul(&y)
            } else {
                c.gamma.mul(&c.one.sub(&y))
            }
        }
    }
}

pub fn logistic_deriv<R: Real>(x: &R, c: &MapCoeffs<R>) -> R {
    c.mu.mul(&c.one.sub(&c.two.mul(x)))
}

pub fn tent_deriv<R: Real>(x: &R, c: &MapCoeffs<R>) -> R {
    if x.lt(&c.half) {
        c.gamma.clone()
    } else {
        c.gamma.neg()
    }
}

/// `mu*G*(1 - 2*G*x)` for `x < 1/2`, else `mu*G*(2*G - 2*G*x - 1)`.
pub fn fog_deriv<R: Real>(x: &R, c: &MapCoeffs<R>) -> R {
    let mg = c.mu.mul(&c.gamma);
    let two_g = c.two.mul(&c.gamma);
    let two_gx = two_g.mul(x);
    if x.lt(&c.half) {
        mg.mul(&c.one.sub(&two_gx))
    } else {
        mg.mul(&two_g.sub(&two_gx).sub(&c.one))
    }
}

/// Corrected: `±G*mu*(1 - 2x)`, negative where `f(x) >= 1/2`.
/// AsPrinted: `G*mu*(1 - 2x)` for `x < 1/2`, else the constant `-G*(mu + 1)`.
pub fn gof_deriv<R: Real>(x: &R, c: &MapCoeffs<R>, variant: GofVariant) -> R {
    let slope = c.gamma.mul(&c.mu).mul(&c.one.sub(&c.two.mul(x)));
    match variant {
        GofVariant::Corrected => {
            if logistic_step(x, c).lt(&c.half) {
                slope
            } else {
                slope.neg()
            }
        }
        GofVariant::AsPrinted => {
            if x.lt(&c.half) {
                slope
            } else {
                c.gamma.mul(&c.mu.add(&c.one)).neg()
            }
        }
    }
}
