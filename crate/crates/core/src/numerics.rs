//! Shared numeric substrate: error functions, signed log-magnitude scalars,
//! exact falling products, reproducible random streams and histograms.

use std::cmp::Ordering;
use std::f64::consts::LN_10;
use std::ops::{Div, Mul, Neg};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, LabResult};

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Below this argument the power series is used; above it the continued
/// fraction for the scaled complement.
const SERIES_LIMIT: f64 = 2.0;

/// erf(x) for 0 <= x < SERIES_LIMIT from the all-positive series
/// erf(x) = (2/sqrt(pi)) e^{-x^2} sum_n 2^n x^{2n+1} / (1*3*...*(2n+1)).
fn erf_series(x: f64) -> f64 {
    let x2 = 2.0 * x * x;
    let mut term = x;
    let mut sum = x;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= x2 / (2.0 * k + 1.0);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x * x).exp() * sum
}

/// Continued fraction for erfcx(x) = e^{x^2} erfc(x), x >= SERIES_LIMIT,
/// evaluated with the modified Lentz method:
/// erfcx(x) = (1/sqrt(pi)) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))).
fn erfcx_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for m in 1..5000 {
        let a = 0.5 * m as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    FRAC_1_SQRT_PI / f
}

/// The error function (2/sqrt(pi)) int_0^x e^{-u^2} du.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return -erf(-x);
    }
    if x < SERIES_LIMIT {
        erf_series(x)
    } else if x > 6.0 {
        1.0
    } else {
        1.0 - erfcx_cf(x) * (-x * x).exp()
    }
}

/// Complementary error function 1 - erf(x), accurate in relative terms for
/// large positive x.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        2.0 - erfc(-x)
    } else if x < SERIES_LIMIT {
        1.0 - erf_series(x)
    } else {
        erfcx_cf(x) * (-x * x).exp()
    }
}

/// Scaled complementary error function e^{x^2} erfc(x). Finite for all
/// x >= 0 and decaying like 1/(x sqrt(pi)).
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        2.0 * (x * x).exp() - erfcx(-x)
    } else if x < SERIES_LIMIT {
        (x * x).exp() * (1.0 - erf_series(x))
    } else {
        erfcx_cf(x)
    }
}

/// A real number stored as a sign and a base-10 logarithm of its magnitude,
/// so that values far outside the `f64` range can be multiplied, divided and
/// added. The logarithm is kept split into an integer part and a fractional
/// part in [0, 1), which keeps about 16 significant digits of the value at
/// any magnitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogReal {
    sign: i8,
    exp10: i64,
    frac10: f64,
}

impl LogReal {
    pub const ZERO: LogReal = LogReal { sign: 0, exp10: 0, frac10: 0.0 };
    pub const ONE: LogReal = LogReal { sign: 1, exp10: 0, frac10: 0.0 };

    fn normalized(sign: i8, exp10: i64, frac10: f64) -> Self {
        if sign == 0 || frac10 == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        if !frac10.is_finite() {
            return Self { sign: sign.signum(), exp10: i64::MAX, frac10: 0.0 };
        }
        let shift = frac10.floor();
        let mut frac = frac10 - shift;
        let mut exp = exp10.saturating_add(shift as i64);
        if frac >= 1.0 {
            frac -= 1.0;
            exp += 1;
        }
        Self { sign: sign.signum(), exp10: exp, frac10: frac }
    }

    pub fn from_log10(sign: i8, log10_magnitude: f64) -> Self {
        Self::normalized(sign, 0, log10_magnitude)
    }

    /// Builds a value from a natural logarithm of its magnitude.
    pub fn from_ln(sign: i8, ln_magnitude: f64) -> Self {
        Self::from_log10(sign, ln_magnitude / LN_10)
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 || x.is_nan() {
            return Self::ZERO;
        }
        let sign = if x > 0.0 { 1 } else { -1 };
        let a = x.abs();
        if a.is_infinite() {
            return Self::from_log10(sign, f64::INFINITY);
        }
        let mut e = a.log10().floor() as i64;
        let mut m = a / pow10(e);
        if m >= 10.0 {
            m /= 10.0;
            e += 1;
        } else if m < 1.0 {
            m *= 10.0;
            e -= 1;
        }
        Self::normalized(sign, e, m.log10())
    }

    pub fn from_biguint(n: &BigUint) -> Self {
        if n.is_zero() {
            return Self::ZERO;
        }
        // Leading decimal digits give the mantissa exactly to f64 precision.
        let digits = n.to_str_radix(10);
        let lead = &digits[..digits.len().min(17)];
        let mantissa: f64 = format!("{}.{}", &lead[..1], &lead[1..]).parse().unwrap();
        Self::normalized(1, digits.len() as i64 - 1, mantissa.log10())
    }

    pub fn sign(self) -> i8 {
        self.sign
    }

    /// Base-10 logarithm of the magnitude (negative infinity for zero).
    pub fn log10_magnitude(self) -> f64 {
        if self.sign == 0 {
            f64::NEG_INFINITY
        } else {
            self.exp10 as f64 + self.frac10
        }
    }

    pub fn ln_magnitude(self) -> f64 {
        self.log10_magnitude() * LN_10
    }

    /// Converts back to `f64`; overflows to infinity and underflows to zero.
    pub fn to_f64(self) -> f64 {
        if self.sign == 0 {
            return 0.0;
        }
        if self.exp10 > 309 {
            return self.sign as f64 * f64::INFINITY;
        }
        if self.exp10 < -345 {
            return 0.0;
        }
        self.sign as f64 * 10f64.powf(self.frac10) * pow10(self.exp10)
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn abs(self) -> Self {
        Self { sign: self.sign.abs(), ..self }
    }

    pub fn powi(self, exponent: i64) -> Self {
        if exponent == 0 {
            return Self::ONE;
        }
        if self.sign == 0 {
            return Self::ZERO;
        }
        let sign = if self.sign < 0 && exponent % 2 != 0 { -1 } else { 1 };
        Self::normalized(sign, self.exp10 * exponent, self.frac10 * exponent as f64)
    }

    /// Signed sum computed without leaving log space.
    pub fn add(self, other: Self) -> Self {
        if self.sign == 0 {
            return other;
        }
        if other.sign == 0 {
            return self;
        }
        let (big, small) = if self.cmp_magnitude(other) != Ordering::Less {
            (self, other)
        } else {
            (other, self)
        };
        let gap = (small.exp10 - big.exp10) as f64 + (small.frac10 - big.frac10);
        let ratio = 10f64.powf(gap);
        if big.sign == small.sign {
            Self::normalized(big.sign, big.exp10, big.frac10 + ratio.ln_1p() / LN_10)
        } else if ratio >= 1.0 {
            Self::ZERO
        } else {
            Self::normalized(big.sign, big.exp10, big.frac10 + (-ratio).ln_1p() / LN_10)
        }
    }

    pub fn sub(self, other: Self) -> Self {
        self.add(-other)
    }

    /// Orders by magnitude only.
    pub fn cmp_magnitude(self, other: Self) -> Ordering {
        match (self.sign == 0, other.sign == 0) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            _ => self.exp10.cmp(&other.exp10).then(self.frac10.total_cmp(&other.frac10)),
        }
    }

    /// Signed mantissa in [1, 10) and decimal exponent.
    pub fn mantissa_exponent(self) -> (f64, i64) {
        if self.sign == 0 {
            return (0.0, 0);
        }
        (self.sign as f64 * 10f64.powf(self.frac10), self.exp10)
    }
}

/// 10^e in two steps so that results near the subnormal range keep their
/// precision.
fn pow10(e: i64) -> f64 {
    let e = e.clamp(-700, 700) as i32;
    let half = e / 2;
    10f64.powi(half) * 10f64.powi(e - half)
}

impl Mul for LogReal {
    type Output = LogReal;
    fn mul(self, rhs: LogReal) -> LogReal {
        if self.sign == 0 || rhs.sign == 0 {
            LogReal::ZERO
        } else {
            LogReal::normalized(self.sign * rhs.sign, self.exp10 + rhs.exp10, self.frac10 + rhs.frac10)
        }
    }
}

impl Div for LogReal {
    type Output = LogReal;
    /// Division by zero yields a signed infinite magnitude.
    fn div(self, rhs: LogReal) -> LogReal {
        if self.sign == 0 {
            return LogReal::ZERO;
        }
        if rhs.sign == 0 {
            return LogReal::from_log10(self.sign, f64::INFINITY);
        }
        LogReal::normalized(self.sign * rhs.sign, self.exp10 - rhs.exp10, self.frac10 - rhs.frac10)
    }
}

impl Neg for LogReal {
    type Output = LogReal;
    fn neg(self) -> LogReal {
        LogReal { sign: -self.sign, ..self }
    }
}

/// Exact product n (n-1) ... (n-r), i.e. r+1 factors.
pub fn falling_product(n: u64, r: u64) -> LabResult<BigUint> {
    if n == 0 || r > n - 1 {
        return domain(format!("falling product needs 0 <= r <= n-1, got n={n}, r={r}"));
    }
    Ok((n - r..=n).fold(BigUint::one(), |acc, f| acc * f))
}

/// base^exponent as a log-magnitude scalar.
pub fn pow_logreal(base: f64, exponent: i64) -> LabResult<LogReal> {
    if !(base > 0.0) || !base.is_finite() {
        return domain(format!("pow_logreal needs a positive finite base, got {base}"));
    }
    Ok(LogReal::from_log10(1, exponent as f64 * base.log10()))
}

/// Counts of events in equal-width time bins starting at `origin`.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub origin: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(origin: f64, bin_width: f64, n_bins: usize) -> LabResult<Self> {
        if !(bin_width > 0.0) || !origin.is_finite() {
            return domain("histogram needs a finite origin and positive bin width");
        }
        Ok(Self { origin, bin_width, counts: vec![0; n_bins] })
    }

    /// Records one event, growing the bin vector when needed. Samples before
    /// the origin are rejected.
    pub fn record(&mut self, t: f64) -> LabResult<()> {
        let offset = (t - self.origin) / self.bin_width;
        if !(offset >= 0.0) || !offset.is_finite() {
            return domain(format!("sample {t} lies before the histogram origin"));
        }
        let bin = offset as usize;
        if bin >= self.counts.len() {
            self.counts.resize(bin + 1, 0);
        }
        self.counts[bin] += 1;
        Ok(())
    }

    /// Adds another histogram with the same binning.
    pub fn merge(&mut self, other: &Histogram) {
        assert_eq!(self.origin, other.origin);
        assert_eq!(self.bin_width, other.bin_width);
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += *b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_start(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.bin_width
    }

    pub fn cumulative(&self) -> Vec<u64> {
        self.counts
            .iter()
            .scan(0u64, |acc, &c| {
                *acc += c;
                Some(*acc)
            })
            .collect()
    }
}

/// Identifies one reproducible random stream. Streams are ChaCha8 keyed by
/// the seed with the stream id selecting an independent counter space, so a
/// given (seed, stream_id) produces the same sequence on every platform and
/// regardless of which worker consumes it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. Returns NaN when
/// either input has no spread.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}
