//! Statistical randomness battery and the Wilcoxon signed-rank comparison.
//!
//! Every test returns a two-sided p-value. Results are graded into three
//! regions (Safe, Doubt, Failure) and separately checked against the wider
//! DIEHARD acceptance band.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::io::Write;

use sha2::{Digest, Sha256};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::dynamics::SeedSource;
use crate::error::{Error, Result};
use crate::manifest::Block;
use crate::prng::{PrngConfig, RandomStream};

/// Smallest sample accepted by [`run_battery`].
pub const MIN_BUDGET: usize = 1_000_000;
/// Significance level used for plain pass/fail decisions.
pub const ALPHA: f64 = 0.001;
/// Largest sample for which Wilcoxon uses the exact null distribution.
pub const WILCOXON_EXACT_MAX: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    Safe,
    Doubt,
    Failure,
}

impl Region {
    pub fn name(&self) -> &'static str {
        match self {
            Region::Safe => "safe",
            Region::Doubt => "doubt",
            Region::Failure => "failure",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what: "p-value",
            value: p.to_string(),
            range: "[0, 1]",
        })
    }
}

/// Safe on (0.25, 0.75), Doubt on (0.1, 0.25] and [0.75, 0.9), Failure
/// otherwise.
pub fn classify_pvalue(p: f64) -> Result<Region> {
    check_probability(p)?;
    Ok(if p > 0.25 && p < 0.75 {
        Region::Safe
    } else if (p > 0.1 && p <= 0.25) || (p >= 0.75 && p < 0.9) {
        Region::Doubt
    } else {
        Region::Failure
    })
}

/// `0.0001 < p < 0.9999`.
pub fn diehard_band(p: f64) -> Result<bool> {
    check_probability(p)?;
    Ok(p > 1e-4 && p < 0.9999)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub region: Region,
    pub sample_size: usize,
}

impl TestResult {
    fn new(name: impl Into<String>, statistic: f64, p_value: f64, sample_size: usize) -> Result<Self> {
        let p_value = p_value.clamp(0.0, 1.0);
        Ok(TestResult {
            name: name.into(),
            statistic,
            p_value,
            region: classify_pvalue(p_value)?,
            sample_size,
        })
    }

    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

/// Two-sided standard normal tail `P(|Z| >= |z|)`.
fn normal_two_sided(z: f64) -> f64 {
    erfc(z.abs() / SQRT_2)
}

/// Bits of a sequence of 32-bit words, most significant bit first.
#[derive(Clone, Copy, Debug)]
pub struct BitSequence<'a> {
    words: &'a [u32],
    len: usize,
}

impl<'a> BitSequence<'a> {
    pub fn new(words: &'a [u32]) -> Self {
        BitSequence {
            words,
            len: words.len() * 32,
        }
    }

    /// The first `len` bits of `words`.
    pub fn with_len(words: &'a [u32], len: usize) -> Result<Self> {
        if len > words.len() * 32 {
            return Err(Error::invalid(format!(
                "{len} bits requested from {} words",
                words.len()
            )));
        }
        Ok(BitSequence { words, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bits of word `i` that belong to the sequence.
    fn valid_bits(&self, i: usize) -> usize {
        (self.len - 32 * i).min(32)
    }

    pub fn ones(&self) -> u64 {
        let used = self.len.div_ceil(32);
        self.words[..used]
            .iter()
            .enumerate()
            .map(|(i, &w)| u64::from((u64::from(w) >> (32 - self.valid_bits(i))).count_ones()))
            .sum()
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range");
        (self.words[i / 32] >> (31 - i % 32)) & 1 == 1
    }

    /// Number of positions where a bit differs from its successor.
    pub fn transitions(&self) -> u64 {
        let used = self.len.div_ceil(32);
        let mut total = 0u64;
        for i in 0..used {
            let w = self.words[i];
            let valid = self.valid_bits(i);
            // Bit p-1 of `pairs` compares bits p and p-1 of `w`.
            let pairs = ((w ^ (w << 1)) >> 1) & 0x7fff_ffff;
            total += u64::from((pairs >> (32 - valid)).count_ones());
            if i + 1 < used {
                total += u64::from((w & 1) != (self.words[i + 1] >> 31));
            }
        }
        total
    }
}

/// Packs booleans into words (MSB first, zero padded).
pub fn pack_bits(bits: &[bool]) -> Vec<u32> {
    bits.chunks(32)
        .map(|c| {
            c.iter()
                .enumerate()
                .fold(0u32, |w, (i, &b)| w | (u32::from(b) << (31 - i)))
        })
        .collect()
}

fn check_bits(n: usize) -> Result<()> {
    if n < 100 {
        return Err(Error::invalid(format!("at least 100 bits required, got {n}")));
    }
    Ok(())
}

/// Frequency test: `z = (ones - zeros) / sqrt(n)`.
pub fn monobit(bits: BitSequence<'_>) -> Result<TestResult> {
    monobit_counts(bits.ones(), bits.len())
}

/// [`monobit`] from a ones count.
pub fn monobit_counts(ones: u64, n: usize) -> Result<TestResult> {
    check_bits(n)?;
    let z = (2.0 * ones as f64 - n as f64) / (n as f64).sqrt();
    TestResult::new("monobit", z, normal_two_sided(z), n)
}

/// Chi-square goodness of fit against equal expected counts.
pub fn chi_square_uniform(counts: &[u64]) -> Result<TestResult> {
    if counts.len() < 2 {
        return Err(Error::invalid("chi-square needs at least 2 symbols"));
    }
    let n: u64 = counts.iter().sum();
    let expected = n as f64 / counts.len() as f64;
    if expected < 5.0 {
        return Err(Error::invalid(format!(
            "expected count per symbol is {expected:.3}, below 5"
        )));
    }
    let chi2: f64 = counts
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    let df = (counts.len() - 1) as f64;
    let p = if chi2 == 0.0 { 1.0 } else { gamma_ur(df / 2.0, chi2 / 2.0) };
    TestResult::new("chi_square", chi2, p, n as usize)
}

/// Counts occurrences of each symbol in `0..categories`.
pub fn symbol_counts(symbols: &[u32], categories: usize) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; categories];
    for &s in symbols {
        *counts
            .get_mut(s as usize)
            .ok_or_else(|| Error::invalid(format!("symbol {s} outside 0..{categories}")))? += 1;
    }
    Ok(counts)
}

/// Pearson correlation of `x_i` against `x_{i+lag}`, graded with the Fisher
/// z-approximation.
pub fn serial_correlation(values: &[f64], lag: usize) -> Result<TestResult> {
    if lag == 0 {
        return Err(Error::invalid("lag must be positive"));
    }
    if values.len() <= lag + 2 {
        return Err(Error::invalid(format!(
            "serial correlation at lag {lag} needs more than {} values",
            lag + 2
        )));
    }
    let a = &values[..values.len() - lag];
    let b = &values[lag..];
    let m = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / m;
    let mean_b = b.iter().sum::<f64>() / m;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Degenerate(format!(
            "lag-{lag} subsequence has zero variance"
        )));
    }
    let r = (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0);
    let p = if r.abs() == 1.0 || m <= 3.0 {
        if r.abs() == 1.0 { 0.0 } else { 1.0 }
    } else {
        normal_two_sided(r.atanh() * (m - 3.0).sqrt())
    };
    TestResult::new(format!("serial_lag{lag}"), r, p, a.len())
}

/// Runs test on a bit sequence. Sequences whose ones proportion is too far
/// from one half fail the applicability gate with [`Error::NotApplicable`].
pub fn runs_test(bits: BitSequence<'_>) -> Result<TestResult> {
    let n = bits.len();
    check_bits(n)?;
    let nf = n as f64;
    let pi = bits.ones() as f64 / nf;
    if (pi - 0.5).abs() >= 2.0 / nf.sqrt() {
        return Err(Error::NotApplicable(format!(
            "ones proportion {pi:.6} fails the runs-test gate"
        )));
    }
    let runs = bits.transitions() as f64 + 1.0;
    let q = pi * (1.0 - pi);
    let z = (runs - 2.0 * nf * q) / (2.0 * nf.sqrt() * q);
    TestResult::new("runs", z, normal_two_sided(z), n)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WilcoxonMethod {
    /// Exact up to [`WILCOXON_EXACT_MAX`] nonzero differences, normal above.
    #[default]
    Auto,
    Exact,
    Normal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub w_plus: f64,
    /// Nonzero differences used.
    pub n: usize,
    pub p_value: f64,
    /// Exact or Normal, whichever was used.
    pub method: WilcoxonMethod,
}

/// Paired two-sided signed-rank test on `a - b`. Zero differences are
/// dropped; tied magnitudes get average ranks.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], method: WilcoxonMethod) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 3 {
        return Err(Error::invalid("signed-rank test needs at least 3 pairs"));
    }
    let mut diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(Error::Degenerate("all paired differences are zero".into()));
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("paired differences must be finite"));
    }
    diffs.sort_by(|x, y| x.abs().total_cmp(&y.abs()));

    // Average ranks, doubled so they stay integral.
    let n = diffs.len();
    let mut ranks2 = vec![0u64; n];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[j + 1].abs() == diffs[i].abs() {
            j += 1;
        }
        let r2 = (i + j + 2) as u64; // 2 * mean of ranks i+1..=j+1
        ranks2[i..=j].fill(r2);
        ties.push((j - i + 1) as f64);
        i = j + 1;
    }
    let w_plus2: u64 = diffs
        .iter()
        .zip(&ranks2)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let total2: u64 = ranks2.iter().sum();
    let w_plus = w_plus2 as f64 / 2.0;
    let w_minus = (total2 - w_plus2) as f64 / 2.0;

    let method = match method {
        WilcoxonMethod::Auto if n <= WILCOXON_EXACT_MAX => WilcoxonMethod::Exact,
        WilcoxonMethod::Auto => WilcoxonMethod::Normal,
        m => m,
    };
    let p_value = match method {
        WilcoxonMethod::Exact => {
            if n > 63 {
                return Err(Error::invalid("exact signed-rank distribution limited to 63 pairs"));
            }
            // dist[s] = number of sign assignments with doubled W+ equal to s.
            let mut dist = vec![0f64; total2 as usize + 1];
            dist[0] = 1.0;
            let mut reach = 0usize;
            for &r in &ranks2 {
                let r = r as usize;
                for s in (0..=reach).rev() {
                    if dist[s] != 0.0 {
                        dist[s + r] += dist[s];
                    }
                }
                reach += r;
            }
            let dev = (2.0 * w_plus2 as f64 - total2 as f64).abs();
            let extreme: f64 = dist
                .iter()
                .enumerate()
                .filter(|(s, _)| (2.0 * *s as f64 - total2 as f64).abs() >= dev)
                .map(|(_, c)| c)
                .sum();
            (extreme / 2f64.powi(n as i32)).min(1.0)
        }
        _ => {
            let nf = n as f64;
            let mean = nf * (nf + 1.0) / 4.0;
            let tie_term: f64 = ties.iter().map(|t| t * t * t - t).sum::<f64>() / 48.0;
            let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
            if var <= 0.0 {
                return Err(Error::Degenerate("signed-rank variance is zero".into()));
            }
            normal_two_sided((w_plus - mean) / var.sqrt())
        }
    };
    Ok(WilcoxonResult {
        statistic: w_plus.min(w_minus),
        w_plus,
        n,
        p_value,
        method,
    })
}

/// One generated sample: decimal symbols and 32-bit words discretized from
/// the same values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub d: u32,
    pub digits: Vec<u32>,
    pub words: Vec<u32>,
}

impl Sample {
    pub fn from_stream(config: &PrngConfig, n: usize) -> Result<Self> {
        let mut stream = RandomStream::new(config.clone())?;
        let mut digits = Vec::with_capacity(n);
        let mut words = Vec::with_capacity(n);
        for _ in 0..n {
            let (digit, word) = stream.next_symbols()?;
            digits.push(digit);
            words.push(word);
        }
        Ok(Sample {
            d: config.d,
            digits,
            words,
        })
    }

    /// Discretizes values in `[0, 1)` the same way the generator does.
    pub fn from_unit_values(values: &[f64], d: u32) -> Self {
        let scale = 10f64.powi(d as i32);
        Sample {
            d,
            digits: values.iter().map(|x| (x * scale).floor() as u32).collect(),
            words: values.iter().map(|x| (x * 4294967296.0).floor() as u32).collect(),
        }
    }

    /// Words only; digits are the leading decimal digits of `w / 2^32`.
    pub fn from_words(words: Vec<u32>, d: u32) -> Self {
        let scale = 10u64.pow(d);
        Sample {
            d,
            digits: words.iter().map(|&w| ((u64::from(w) * scale) >> 32) as u32).collect(),
            words,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkippedTest {
    pub name: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestReport {
    /// SHA-256 of the generator configuration text.
    pub digest: String,
    pub results: Vec<TestResult>,
    pub skipped: Vec<SkippedTest>,
    pub safe: usize,
    pub doubt: usize,
    pub failure: usize,
    /// Results inside the DIEHARD band.
    pub diehard_pass: usize,
}

impl TestReport {
    pub fn new(digest: String, results: Vec<TestResult>, skipped: Vec<SkippedTest>) -> Self {
        let count = |r: Region| results.iter().filter(|t| t.region == r).count();
        let diehard_pass = results
            .iter()
            .filter(|t| diehard_band(t.p_value).unwrap_or(false))
            .count();
        TestReport {
            safe: count(Region::Safe),
            doubt: count(Region::Doubt),
            failure: count(Region::Failure),
            diehard_pass,
            digest,
            results,
            skipped,
        }
    }

    /// Results with `p > alpha`.
    pub fn pass_count(&self, alpha: f64) -> usize {
        self.results.iter().filter(|t| t.passes(alpha)).count()
    }

    pub fn get(&self, name: &str) -> Option<&TestResult> {
        self.results.iter().find(|t| t.name == name)
    }

    /// `test,statistic,p_value,region`, skipped tests last with region
    /// `skipped`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "test,statistic,p_value,region")?;
        for t in &self.results {
            writeln!(w, "{},{},{},{}", t.name, t.statistic, t.p_value, t.region)?;
        }
        for s in &self.skipped {
            writeln!(w, "{},,,skipped", s.name)?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = format!("config digest: {}\n", self.digest);
        for t in &self.results {
            s.push_str(&format!(
                "  {:<12} statistic={:<12.6} p={:<10.6} {}\n",
                t.name, t.statistic, t.p_value, t.region
            ));
        }
        for k in &self.skipped {
            s.push_str(&format!("  {:<12} skipped ({})\n", k.name, k.reason));
        }
        s.push_str(&format!(
            "regions: safe={} doubt={} failure={}; diehard band {}/{}; p > {ALPHA}: {}/{}\n",
            self.safe,
            self.doubt,
            self.failure,
            self.diehard_pass,
            self.results.len(),
            self.pass_count(ALPHA),
            self.results.len()
        ));
        s
    }
}

pub fn config_digest(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Chi-square on digits, serial correlation of digits at lags 1 to 3,
/// monobit and runs on the word bits.
pub fn run_battery_on_sample(sample: &Sample, digest: String) -> Result<TestReport> {
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    let mut record = |name: &str, r: Result<TestResult>| -> Result<()> {
        match r {
            Ok(t) => results.push(t),
            Err(Error::NotApplicable(reason)) => skipped.push(SkippedTest {
                name: name.to_string(),
                reason,
            }),
            Err(e) => return Err(e),
        }
        Ok(())
    };

    let categories = 10usize.pow(sample.d);
    record(
        "chi_square",
        symbol_counts(&sample.digits, categories).and_then(|c| chi_square_uniform(&c)),
    )?;
    let values: Vec<f64> = sample.digits.iter().map(|&x| f64::from(x)).collect();
    for lag in 1..=3 {
        let name = format!("serial_lag{lag}");
        let r = match serial_correlation(&values, lag) {
            // A constant digit stream is maximally non-random.
            Err(Error::Degenerate(_)) => TestResult::new(name.clone(), f64::NAN, 0.0, values.len() - lag),
            r => r,
        };
        record(&name, r)?;
    }
    let bits = BitSequence::new(&sample.words);
    record("monobit", monobit(bits))?;
    record("runs", runs_test(bits))?;
    Ok(TestReport::new(digest, results, skipped))
}

/// Generates `budget` symbols from `config` and runs the battery on them.
pub fn run_battery(config: &PrngConfig, budget: usize) -> Result<TestReport> {
    if budget < MIN_BUDGET {
        return Err(Error::invalid(format!(
            "battery budget must be at least {MIN_BUDGET}, got {budget}"
        )));
    }
    let sample = Sample::from_stream(config, budget)?;
    let mut block = Block::new();
    config.write_block(&mut block);
    block.set("budget", budget);
    run_battery_on_sample(&sample, config_digest(&block.to_string()))
}

/// Per-k comparison of two generators.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub k: u32,
    /// Pass counts (`p > ALPHA`) for each file, generator A.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Signed-rank test over the files at this `k`; `None` when every
    /// difference is zero or there are fewer than 3 files.
    pub wilcoxon: Option<WilcoxonResult>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Signed-rank test pairing the per-k mean pass counts.
    pub overall: Option<WilcoxonResult>,
}

impl Comparison {
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "k,mean_pass_a,mean_pass_b,statistic,p_value")?;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let tail = |r: &Option<WilcoxonResult>| match r {
            Some(r) => format!("{},{}", r.statistic, r.p_value),
            None => ",".to_string(),
        };
        for row in &self.rows {
            writeln!(w, "{},{},{},{}", row.k, mean(&row.a), mean(&row.b), tail(&row.wilcoxon))?;
        }
        let means = |f: fn(&ComparisonRow) -> &Vec<f64>| {
            self.rows.iter().map(|r| mean(f(r))).sum::<f64>() / self.rows.len() as f64
        };
        writeln!(w, "all,{},{},{}", means(|r| &r.a), means(|r| &r.b), tail(&self.overall))?;
        Ok(())
    }
}

fn optional_wilcoxon(a: &[f64], b: &[f64]) -> Result<Option<WilcoxonResult>> {
    if a.len() < 3 {
        return Ok(None);
    }
    match wilcoxon_signed_rank(a, b, WilcoxonMethod::Auto) {
        Ok(r) => Ok(Some(r)),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Runs the battery on `files` seeds per `k` for both generators and pairs
/// their pass counts. File `i` at a given `k` uses the same seed for both.
pub fn compare_generators(
    a: &PrngConfig,
    b: &PrngConfig,
    ks: &[u32],
    files: usize,
    budget: usize,
    master_seed: u64,
) -> Result<Comparison> {
    use rayon::prelude::*;
    if files == 0 || ks.is_empty() {
        return Err(Error::invalid("comparison needs at least one k and one file"));
    }
    let mut seeds = SeedSource::new(master_seed);
    let jobs: Vec<(u32, _)> = ks
        .iter()
        .flat_map(|&k| (0..files).map(move |_| k))
        .map(|k| (k, seeds.next_seed()))
        .collect();
    let counts: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|(k, seed)| {
            let ca = a.clone().with_k(*k).with_seed(seed.clone());
            let cb = b.clone().with_k(*k).with_seed(seed.clone());
            Ok((
                run_battery(&ca, budget)?.pass_count(ALPHA) as f64,
                run_battery(&cb, budget)?.pass_count(ALPHA) as f64,
            ))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, &k) in ks.iter().enumerate() {
        let chunk = &counts[i * files..(i + 1) * files];
        let (ra, rb): (Vec<f64>, Vec<f64>) = chunk.iter().copied().unzip();
        rows.push(ComparisonRow {
            k,
            wilcoxon: optional_wilcoxon(&ra, &rb)?,
            a: ra,
            b: rb,
        });
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ma: Vec<f64> = rows.iter().map(|r| mean(&r.a)).collect();
    let mb: Vec<f64> = rows.iter().map(|r| mean(&r.b)).collect();
    Ok(Comparison {
        overall: optional_wilcoxon(&ma, &mb)?,
        rows,
    })
}
