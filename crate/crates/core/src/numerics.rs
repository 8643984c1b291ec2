//! Real arithmetic at a fixed precision: native `f64` or an extended binary
//! float backed by `astro-float`.
//!
//! Every orbit is computed at a single [`PrecisionMode`]. Map code is written
//! against the [`Real`] trait and monomorphized for both representations;
//! [`PhaseValue`] is the runtime-tagged value handed across API boundaries.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign};

use crate::error::{Error, Result};

const RM: RoundingMode = RoundingMode::ToEven;

/// Digits that must survive the deep-zoom shift. A 53-bit significand holds
/// 15 whole decimal digits, so native mode keeps `k <= 6`.
const RESERVED_DIGITS: u32 = 9;

/// Arithmetic precision used for a whole computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PrecisionMode {
    /// IEEE-754 binary64 (53-bit significand).
    Native,
    /// Binary floating point with the given significand width in bits.
    Extended(u32),
}

impl PrecisionMode {
    pub const MIN_EXTENDED_BITS: u32 = 64;
    pub const MAX_EXTENDED_BITS: u32 = 8192;
    pub const DEFAULT_EXTENDED_BITS: u32 = 512;

    /// Builds an extended mode, checking the bit budget.
    pub fn extended(bits: u32) -> Result<Self> {
        let mode = PrecisionMode::Extended(bits);
        mode.validate()?;
        Ok(mode)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PrecisionMode::Native => Ok(()),
            PrecisionMode::Extended(bits) => {
                if !(Self::MIN_EXTENDED_BITS..=Self::MAX_EXTENDED_BITS).contains(&bits) {
                    return Err(Error::invalid(format!(
                        "extended precision must be between {} and {} bits, got {bits}",
                        Self::MIN_EXTENDED_BITS,
                        Self::MAX_EXTENDED_BITS
                    )));
                }
                // astro-float stores mantissas in whole 64-bit words.
                if bits % 64 != 0 {
                    return Err(Error::invalid(format!(
                        "extended precision must be a multiple of 64 bits, got {bits}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn significand_bits(&self) -> u32 {
        match *self {
            PrecisionMode::Native => f64::MANTISSA_DIGITS,
            PrecisionMode::Extended(bits) => bits,
        }
    }

    /// Largest deep-zoom level `k` this precision supports.
    pub fn max_zoom(&self) -> u32 {
        let digits = (f64::from(self.significand_bits()) * std::f64::consts::LOG10_2).floor() as u32;
        digits.saturating_sub(RESERVED_DIGITS)
    }

    pub fn check_zoom(&self, k: u32) -> Result<()> {
        if k > self.max_zoom() {
            return Err(Error::PrecisionConflict {
                k,
                mode: *self,
                max: self.max_zoom(),
            });
        }
        Ok(())
    }
}

impl Default for PrecisionMode {
    fn default() -> Self {
        PrecisionMode::Extended(Self::DEFAULT_EXTENDED_BITS)
    }
}

impl fmt::Display for PrecisionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrecisionMode::Native => f.write_str("native"),
            PrecisionMode::Extended(bits) => write!(f, "extended:{bits}"),
        }
    }
}

impl FromStr for PrecisionMode {
    type Err = Error;

    /// Accepts `native`, `extended` (512 bits) or `extended:<bits>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mode = match s {
            "native" => PrecisionMode::Native,
            "extended" => PrecisionMode::default(),
            _ => {
                let bits = s
                    .strip_prefix("extended:")
                    .and_then(|b| b.parse::<u32>().ok())
                    .ok_or_else(|| Error::invalid(format!("unknown precision '{s}'")))?;
                PrecisionMode::Extended(bits)
            }
        };
        mode.validate()?;
        Ok(mode)
    }
}

/// Extended-precision binary float. All operations round to nearest-even at
/// the value's own precision.
#[derive(Clone, Debug)]
pub struct ExtFloat {
    value: BigFloat,
    bits: usize,
}

/// Precision context for [`ExtFloat`] construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExtCtx {
    bits: usize,
}

impl ExtCtx {
    pub fn new(bits: u32) -> Self {
        ExtCtx { bits: bits as usize }
    }

    pub fn bits(&self) -> u32 {
        self.bits as u32
    }
}

impl ExtFloat {
    /// Signed zeros are collapsed to `+0` so that `fract` never yields `-0`.
    fn wrap(&self, value: BigFloat) -> Self {
        let value = if value.is_zero() && value.is_negative() {
            BigFloat::from_f64(0.0, self.bits)
        } else {
            value
        };
        ExtFloat { value, bits: self.bits }
    }

    pub fn bits(&self) -> u32 {
        self.bits as u32
    }

    pub fn as_bigfloat(&self) -> &BigFloat {
        &self.value
    }

    fn ordering(&self, rhs: &Self) -> Ordering {
        match self.value.cmp(&rhs.value) {
            Some(c) if c < 0 => Ordering::Less,
            Some(0) => Ordering::Equal,
            Some(_) => Ordering::Greater,
            // NaN never results from in-range map arithmetic.
            None => Ordering::Equal,
        }
    }

    /// Splits into (top 64 mantissa bits, sticky flag for lower bits, exponent).
    /// The value equals `0.top... * 2^exponent`.
    fn top_word(&self) -> Option<(u64, bool, i32, bool)> {
        let (words, _, sign, exp, _) = self.value.as_raw_parts()?;
        let (&top, rest) = words.split_last()?;
        if top == 0 {
            return None;
        }
        let sticky = rest.iter().any(|&w| w != 0);
        Some((top, sticky, exp, sign == Sign::Neg))
    }
}

impl PartialEq for ExtFloat {
    fn eq(&self, other: &Self) -> bool {
        self.value.cmp(&other.value) == Some(0)
    }
}

impl fmt::Display for ExtFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&Real::to_decimal_string(self))
    }
}

/// Arithmetic used by the maps. Implemented for `f64` and [`ExtFloat`].
pub trait Real: Clone + fmt::Debug + Send + Sync + 'static {
    type Ctx: Copy + fmt::Debug + Send + Sync;

    /// Exact conversion of a binary64 value (all constants used by the maps
    /// are small dyadic rationals or integers).
    fn from_f64_exact(ctx: Self::Ctx, v: f64) -> Self;
    /// Decimal parse, rounded to nearest-even. `None` on malformed input.
    fn parse_decimal(ctx: Self::Ctx, s: &str) -> Option<Self>;

    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn floor(&self) -> Self;
    fn cmp_real(&self, rhs: &Self) -> Ordering;
    fn is_zero(&self) -> bool;
    fn is_finite(&self) -> bool;
    /// Nearest binary64 value.
    fn to_f64(&self) -> f64;
    /// `floor(x * 2^n) mod 2^n` for `x >= 0`, `1 <= n <= 64`.
    fn frac_bits(&self, n: u32) -> u64;
    fn to_decimal_string(&self) -> String;
    fn into_phase(self) -> PhaseValue;

    fn lt(&self, rhs: &Self) -> bool {
        self.cmp_real(rhs) == Ordering::Less
    }

    /// `self - floor(self)`.
    fn fract(&self) -> Self {
        self.sub(&self.floor())
    }
}

impl Real for f64 {
    type Ctx = ();

    fn from_f64_exact(_: (), v: f64) -> Self {
        v
    }

    fn parse_decimal(_: (), s: &str) -> Option<Self> {
        s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
    }

    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }

    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }

    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }

    fn neg(&self) -> Self {
        -self
    }

    fn floor(&self) -> Self {
        f64::floor(*self)
    }

    fn cmp_real(&self, rhs: &Self) -> Ordering {
        self.partial_cmp(rhs).unwrap_or(Ordering::Equal)
    }

    fn is_zero(&self) -> bool {
        *self == 0.0
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn frac_bits(&self, n: u32) -> u64 {
        assert!((1..=64).contains(&n), "frac_bits width must be in 1..=64");
        let x = f64::fract(*self);
        // Scaling by a power of two is exact; the product is below 2^n.
        let scaled = (x * 2f64.powi(n as i32)).floor();
        let v = scaled as u64;
        if n == 64 {
            v
        } else {
            v & ((1u64 << n) - 1)
        }
    }

    fn to_decimal_string(&self) -> String {
        // Shortest representation that round-trips.
        format!("{self:?}")
    }

    fn into_phase(self) -> PhaseValue {
        PhaseValue::Native(self)
    }
}

impl Real for ExtFloat {
    type Ctx = ExtCtx;

    fn from_f64_exact(ctx: ExtCtx, v: f64) -> Self {
        ExtFloat {
            value: BigFloat::from_f64(v, ctx.bits),
            bits: ctx.bits,
        }
    }

    fn parse_decimal(ctx: ExtCtx, s: &str) -> Option<Self> {
        let s = s.trim();
        if s.is_empty() {
            return None;
        }
        let mut cc = Consts::new().ok()?;
        let value = BigFloat::parse(s, Radix::Dec, ctx.bits, RM, &mut cc);
        if value.is_nan() || value.is_inf() {
            return None;
        }
        Some(ExtFloat { value, bits: ctx.bits })
    }

    fn add(&self, rhs: &Self) -> Self {
        self.wrap(self.value.add(&rhs.value, self.bits, RM))
    }

    fn sub(&self, rhs: &Self) -> Self {
        self.wrap(self.value.sub(&rhs.value, self.bits, RM))
    }

    fn mul(&self, rhs: &Self) -> Self {
        self.wrap(self.value.mul(&rhs.value, self.bits, RM))
    }

    fn neg(&self) -> Self {
        self.wrap(self.value.neg())
    }

    fn floor(&self) -> Self {
        self.wrap(self.value.floor())
    }

    fn cmp_real(&self, rhs: &Self) -> Ordering {
        self.ordering(rhs)
    }

    fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    fn is_finite(&self) -> bool {
        !(self.value.is_nan() || self.value.is_inf())
    }

    fn to_f64(&self) -> f64 {
        let Some((top, sticky, exp, negative)) = self.top_word() else {
            return 0.0;
        };
        // Folding the sticky bit into bit 0 keeps `as f64` correctly rounded.
        let m = (top | u64::from(sticky)) as f64;
        // value = m * 2^(exp - 64); split the scaling to stay in range.
        let e = exp - 64;
        let half = e / 2;
        let v = m * 2f64.powi(half) * 2f64.powi(e - half);
        if negative {
            -v
        } else {
            v
        }
    }

    fn frac_bits(&self, n: u32) -> u64 {
        assert!((1..=64).contains(&n), "frac_bits width must be in 1..=64");
        let frac = self.fract();
        let Some((top, _, exp, _)) = frac.top_word() else {
            return 0;
        };
        // frac = 0.top * 2^exp with exp <= 0, so floor(frac * 2^n) keeps the
        // leading (n + exp) mantissa bits.
        let shift = n as i32 + exp;
        if shift <= 0 {
            0
        } else {
            top >> (64 - shift as u32)
        }
    }

    fn to_decimal_string(&self) -> String {
        let mut cc = match Consts::new() {
            Ok(cc) => cc,
            Err(_) => return format!("{:?}", self.to_f64()),
        };
        match self.value.format(Radix::Dec, RM, &mut cc) {
            Ok(text) => scientific_to_fixed(&text).unwrap_or(text),
            Err(_) => format!("{:?}", self.to_f64()),
        }
    }

    fn into_phase(self) -> PhaseValue {
        PhaseValue::Extended(self)
    }
}

/// Rewrites `d.ddde-N` as plain positional notation with trailing zeros
/// trimmed. Returns `None` for anything else or for very large exponents.
fn scientific_to_fixed(text: &str) -> Option<String> {
    let (mantissa, exp) = text.split_once(['e', 'E'])?;
    let exp: i64 = exp.parse().ok()?;
    if !(-1000..=64).contains(&exp) {
        return None;
    }
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int.is_empty() || !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    // Position of the decimal point within `digits`.
    let point = int.len() as i64 + exp;
    let (whole, fraction) = if point <= 0 {
        ("0".to_string(), format!("{}{digits}", "0".repeat((-point) as usize)))
    } else if point as usize >= digits.len() {
        (format!("{digits}{}", "0".repeat(point as usize - digits.len())), String::new())
    } else {
        (digits[..point as usize].to_string(), digits[point as usize..].to_string())
    };
    let whole = whole.trim_start_matches('0');
    let whole = if whole.is_empty() { "0" } else { whole };
    let fraction = fraction.trim_end_matches('0');
    let fraction = if fraction.is_empty() { "0" } else { fraction };
    Some(format!("{sign}{whole}.{fraction}"))
}

/// A phase-space value carried at a specific precision.
#[derive(Clone, Debug, PartialEq)]
pub enum PhaseValue {
    Native(f64),
    Extended(ExtFloat),
}

impl PhaseValue {
    pub fn mode(&self) -> PrecisionMode {
        match self {
            PhaseValue::Native(_) => PrecisionMode::Native,
            PhaseValue::Extended(e) => PrecisionMode::Extended(e.bits()),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            PhaseValue::Native(v) => *v,
            PhaseValue::Extended(e) => e.to_f64(),
        }
    }

    /// Decimal text that parses back to exactly this value at the same precision.
    pub fn to_decimal_string(&self) -> String {
        match self {
            PhaseValue::Native(v) => v.to_decimal_string(),
            PhaseValue::Extended(e) => e.to_decimal_string(),
        }
    }

    /// `floor(x * 10^d)` computed at this value's precision.
    pub fn decimal_digits(&self, d: u32) -> u64 {
        match self {
            PhaseValue::Native(v) => scaled_floor(v, (), d),
            PhaseValue::Extended(e) => scaled_floor(e, ExtCtx { bits: e.bits }, d),
        }
    }
}

impl fmt::Display for PhaseValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

pub(crate) fn scaled_floor<R: Real>(x: &R, ctx: R::Ctx, d: u32) -> u64 {
    let scale = R::from_f64_exact(ctx, 10f64.powi(d as i32));
    x.mul(&scale).floor().to_f64() as u64
}

/// Parses a decimal string into a phase value in `[0, 1]`.
pub fn make_value(decimal: &str, mode: PrecisionMode) -> Result<PhaseValue> {
    mode.validate()?;
    match mode {
        PrecisionMode::Native => parse_unit::<f64>((), decimal).map(PhaseValue::Native),
        PrecisionMode::Extended(bits) => {
            parse_unit::<ExtFloat>(ExtCtx::new(bits), decimal).map(PhaseValue::Extended)
        }
    }
}

pub(crate) fn parse_unit<R: Real>(ctx: R::Ctx, decimal: &str) -> Result<R> {
    let v = R::parse_decimal(ctx, decimal).ok_or_else(|| Error::Parse(decimal.to_string()))?;
    let zero = R::from_f64_exact(ctx, 0.0);
    let one = R::from_f64_exact(ctx, 1.0);
    if v.lt(&zero) || one.lt(&v) {
        return Err(Error::OutOfRange {
            what: "phase value",
            value: decimal.to_string(),
            range: "[0, 1]",
        });
    }
    Ok(v)
}

/// First `n` bits of the binary fraction of `x`, i.e. `floor(x * 2^n) mod 2^n`.
/// `x = 1` wraps to 0.
pub fn frac_bits(x: &PhaseValue, n: u32) -> u64 {
    match x {
        PhaseValue::Native(v) => v.frac_bits(n),
        PhaseValue::Extended(e) => e.frac_bits(n),
    }
}

/// Decimal seed text for an initial condition, strictly inside `(0, 1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Seed(String);

impl Seed {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into().trim().to_string();
        // Checked at high precision so that e.g. 0.99999999999999999 is kept.
        let v = parse_unit::<ExtFloat>(ExtCtx::new(1024), &text)?;
        if v.is_zero() || v == ExtFloat::from_f64_exact(ExtCtx::new(1024), 1.0) {
            return Err(Error::OutOfRange {
                what: "seed",
                value: text,
                range: "(0, 1)",
            });
        }
        Ok(Seed(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The seed rounded to a concrete precision; must stay inside `(0, 1)`.
    pub fn value<R: Real>(&self, ctx: R::Ctx) -> Result<R> {
        let v = parse_unit::<R>(ctx, &self.0)?;
        let one = R::from_f64_exact(ctx, 1.0);
        if v.is_zero() || !v.lt(&one) {
            return Err(Error::OutOfRange {
                what: "seed at the selected precision",
                value: self.0.clone(),
                range: "(0, 1)",
            });
        }
        Ok(v)
    }

    pub fn phase_value(&self, mode: PrecisionMode) -> Result<PhaseValue> {
        match mode {
            PrecisionMode::Native => self.value::<f64>(()).map(PhaseValue::Native),
            PrecisionMode::Extended(bits) => {
                self.value::<ExtFloat>(ExtCtx::new(bits)).map(PhaseValue::Extended)
            }
        }
    }
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Seed {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Seed::new(s)
    }
}

/// Runs `$body` with `$R` bound to the concrete [`Real`] type for `$mode` and
/// `$ctx` to its construction context.
macro_rules! with_precision {
    ($mode:expr, |$ctx:ident : $R:ident| $body:expr) => {
        match $mode {
            $crate::numerics::PrecisionMode::Native => {
                #[allow(dead_code)]
                type $R = f64;
                let $ctx = ();
                $body
            }
            $crate::numerics::PrecisionMode::Extended(bits) => {
                type $R = $crate::numerics::ExtFloat;
                let $ctx = $crate::numerics::ExtCtx::new(bits);
                $body
            }
        }
    };
}
pub(crate) use with_precision;
