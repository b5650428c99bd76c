//! Counting observer sequences: how many of the K^n result sequences hold
//! preassigned eigenvalues at a given number of places, their Bernoulli
//! measures and the relative growth rate in r.
//!
//! Two conventions for the unit-multiplicity count coexist. `Formula` is
//! prod_{i=0}^{r}(100-i) (K-1)^{100-r}. `Published` uses the exponent 99-r for
//! r >= 1, which is what the historical table of these counts contains; for
//! K = 2 and for r = 0 the two agree.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{domain, LabResult};
use crate::numerics::{falling_product, pow_logreal, LogReal};
use crate::table::{Cell, DataTable};

/// Length of every observer's sequence.
pub const N_EXPERIMENTS: u64 = 100;

/// Column order of the historical table.
pub const COUNT_COLUMNS_K: [u64; 5] = [1100, 100, 10, 5, 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountMode {
    Formula,
    Published,
}

impl CountMode {
    pub fn tag(self) -> &'static str {
        match self {
            CountMode::Formula => "formula",
            CountMode::Published => "published",
        }
    }

    fn exponent(self, r: u64) -> u64 {
        match self {
            CountMode::Published if r >= 1 => N_EXPERIMENTS - 1 - r,
            _ => N_EXPERIMENTS - r,
        }
    }
}

/// n experiments with K outcomes each; preassigned value i occupies exactly
/// R_i places.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountParams {
    pub n: u64,
    pub k: u64,
    pub multiplicities: Vec<u64>,
}

impl CountParams {
    pub fn new(n: u64, k: u64, multiplicities: Vec<u64>) -> LabResult<Self> {
        if k == 0 {
            return domain("K must be at least 1");
        }
        if multiplicities.contains(&0) {
            return domain("multiplicities must be positive");
        }
        let total: u64 = multiplicities.iter().sum();
        if total > n {
            return domain(format!("multiplicities sum to {total}, more than n = {n}"));
        }
        Ok(Self { n, k, multiplicities })
    }

    pub fn r(&self) -> usize {
        self.multiplicities.len()
    }
}

fn binomial(n: u64, k: u64) -> BigUint {
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// C(n, R1) C(n-R1, R2) ... for the given multiplicities.
fn placement_count(n: u64, multiplicities: &[u64]) -> BigUint {
    let mut left = n;
    let mut acc = BigUint::one();
    for &m in multiplicities {
        acc *= binomial(left, m);
        left -= m;
    }
    acc
}

/// prod C(n - sum_{j<i} R_j, R_i) (K-1)^{n - sum R}, exactly.
pub fn count_sequences_general(p: &CountParams) -> BigUint {
    let free = p.n - p.multiplicities.iter().sum::<u64>();
    placement_count(p.n, &p.multiplicities) * BigUint::from(p.k - 1).pow(free as u32)
}

fn check_unit(k: u64, r: u64) -> LabResult<()> {
    if k == 0 {
        return domain("K must be at least 1");
    }
    if r >= N_EXPERIMENTS {
        return domain(format!("r must lie in 0..={}, got {r}", N_EXPERIMENTS - 1));
    }
    Ok(())
}

/// Unit-multiplicity count as an exact integer.
pub fn count_unit_exact(k: u64, r: u64, mode: CountMode) -> LabResult<BigUint> {
    check_unit(k, r)?;
    let f = falling_product(N_EXPERIMENTS, r)?;
    Ok(f * BigUint::from(k - 1).pow(mode.exponent(r) as u32))
}

/// Unit-multiplicity count in log form, without big-integer powers.
pub fn count_unit(k: u64, r: u64, mode: CountMode) -> LabResult<LogReal> {
    check_unit(k, r)?;
    let f = LogReal::from_biguint(&falling_product(N_EXPERIMENTS, r)?);
    let e = mode.exponent(r) as i64;
    let power = if k == 1 {
        if e == 0 { LogReal::ONE } else { LogReal::ZERO }
    } else {
        pow_logreal((k - 1) as f64, e)?
    };
    Ok(f * power)
}

pub fn count_sequences_unit(k: u64, r: u64) -> LabResult<LogReal> {
    count_unit(k, r, CountMode::Formula)
}

pub fn count_sequences_published(k: u64, r: u64) -> LabResult<LogReal> {
    count_unit(k, r, CountMode::Published)
}

/// base^e for base in [0, 1] with 0^0 = 1.
fn unit_power(base: f64, e: u64) -> LabResult<LogReal> {
    if e == 0 {
        Ok(LogReal::ONE)
    } else if base == 0.0 {
        Ok(LogReal::ZERO)
    } else {
        pow_logreal(base, e as i64)
    }
}

/// prod_{i=0}^{r}(100-i) (r/100)^r ((100-r)/100)^{100-r}, for r in 0..=100.
pub fn measure_unit(r: u64) -> LabResult<f64> {
    if r > N_EXPERIMENTS {
        return domain(format!("r must lie in 0..=100, got {r}"));
    }
    if r == N_EXPERIMENTS {
        return Ok(0.0);
    }
    let n = N_EXPERIMENTS as f64;
    let f = LogReal::from_biguint(&falling_product(N_EXPERIMENTS, r)?);
    let m = f * unit_power(r as f64 / n, r)? * unit_power((n - r as f64) / n, N_EXPERIMENTS - r)?;
    Ok(m.to_f64())
}

/// Bernoulli measure of one placement pattern: the placement count times
/// P^{sum R} Q^{n - sum R}. Zero multiplicities are allowed here.
pub fn measure_general(n: u64, multiplicities: &[u64], p: f64) -> LabResult<f64> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("P must lie in [0, 1], got {p}"));
    }
    let total: u64 = multiplicities.iter().sum();
    if total > n {
        return domain(format!("multiplicities sum to {total}, more than n = {n}"));
    }
    let c = LogReal::from_biguint(&placement_count(n, multiplicities));
    Ok((c * unit_power(p, total)? * unit_power(1.0 - p, n - total)?).to_f64())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub sd: f64,
    /// P is 0 or 1, so the distribution is a point mass.
    pub degenerate: bool,
}

pub fn gaussian_approx(n: u64, p: f64) -> LabResult<Gaussian> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("P must lie in [0, 1], got {p}"));
    }
    let n = n as f64;
    Ok(Gaussian { mean: n * p, sd: (n * p * (1.0 - p)).sqrt(), degenerate: p == 0.0 || p == 1.0 })
}

/// Binomial mass within three standard deviations of the mean.
pub fn three_sigma_mass(n: u64, p: f64) -> LabResult<f64> {
    let g = gaussian_approx(n, p)?;
    let mut mass = 0.0;
    for k in 0..=n {
        if (k as f64 - g.mean).abs() <= 3.0 * g.sd {
            mass += measure_general(n, &[k], p)?;
        }
    }
    Ok(mass)
}

/// (N(K,r) - N(K,r-1)) / N(K,r).
pub fn relative_rate(k: u64, r: u64, mode: CountMode) -> LabResult<f64> {
    if r == 0 {
        return domain("relative rate needs r >= 1");
    }
    let now = count_unit(k, r, mode)?;
    if now.is_zero() {
        return domain(format!("count vanishes at K={k}, r={r}"));
    }
    let before = count_unit(k, r - 1, mode)?;
    Ok((now.sub(before) / now).to_f64())
}

/// Rows (K, r, rate) over the grid; cells where the rate is undefined are
/// left out.
pub fn rate_surface(ks: &[u64], rs: &[u64], mode: CountMode) -> LabResult<DataTable> {
    let cells: Vec<(u64, u64)> = ks.iter().flat_map(|&k| rs.iter().map(move |&r| (k, r))).collect();
    let rates: Vec<Option<f64>> = cells.par_iter().map(|&(k, r)| relative_rate(k, r, mode).ok()).collect();
    let mut table = DataTable::new(["K", "r", "rate"]).with_meta("count_mode", mode.tag());
    let mut omitted = 0;
    for ((k, r), rate) in cells.into_iter().zip(rates) {
        match rate {
            Some(v) => table.push_row(vec![Cell::from(k), Cell::from(r), v.into()])?,
            None => omitted += 1,
        }
    }
    Ok(table.with_meta("omitted_cells", omitted.to_string()))
}

/// Decimal scientific form with `digits` significant digits, rounded half up,
/// e.g. 1258256... -> "1.2582567e306".
pub fn format_sig(n: &BigUint, digits: usize) -> String {
    assert!(digits >= 1);
    if n.is_zero() {
        return format!("{}e0", pad_mantissa("0".repeat(digits)));
    }
    let s = n.to_str_radix(10);
    let mut exp = s.len() - 1;
    let mut head: Vec<u8> = s.bytes().take(digits).map(|b| b - b'0').collect();
    head.resize(digits, 0);
    if s.len() > digits && s.as_bytes()[digits] >= b'5' {
        let mut i = digits;
        loop {
            if i == 0 {
                head.insert(0, 1);
                head.truncate(digits);
                exp += 1;
                break;
            }
            i -= 1;
            if head[i] == 9 {
                head[i] = 0;
            } else {
                head[i] += 1;
                break;
            }
        }
    }
    let m: String = head.iter().map(|d| char::from(b'0' + d)).collect();
    format!("{}e{exp}", pad_mantissa(m))
}

fn pad_mantissa(m: String) -> String {
    if m.len() == 1 {
        m
    } else {
        format!("{}.{}", &m[..1], &m[1..])
    }
}

/// The 50 even-r rows (r = 0, 2, ..., 98) for K = 1100, 100, 10, 5, 2.
/// In exact mode every cell is the full decimal integer.
pub fn table1(mode: CountMode, exact: bool) -> LabResult<DataTable> {
    let mut cols = vec!["r".to_string()];
    cols.extend(COUNT_COLUMNS_K.iter().map(|k| format!("K={k}")));
    let mut table = DataTable::new(cols)
        .with_meta("count_mode", mode.tag())
        .with_meta("n", N_EXPERIMENTS.to_string())
        .with_meta("cells", if exact { "exact integers" } else { "floating" });
    let rows: Vec<LabResult<Vec<Cell>>> = (0..50u64)
        .into_par_iter()
        .map(|i| {
            let r = 2 * i;
            let mut row = vec![Cell::from(r)];
            for &k in &COUNT_COLUMNS_K {
                row.push(if exact {
                    Cell::Exact(count_unit_exact(k, r, mode)?.to_str_radix(10))
                } else {
                    count_unit(k, r, mode)?.to_f64().into()
                });
            }
            Ok(row)
        })
        .collect();
    for row in rows {
        table.push_row(row?)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Sequences over K symbols, symbol 0 standing for "preassigned"; each
    /// sequence with h preassigned places contributes the number of ways to
    /// label those places so that label i appears R_i times.
    fn brute(n: u32, k: u64, rs: &[u64]) -> BigUint {
        let total: u64 = rs.iter().sum();
        let labelings = placement_count(total, rs);
        let mut count = BigUint::zero();
        for code in 0..k.pow(n) {
            let mut c = code;
            let mut h = 0;
            for _ in 0..n {
                h += (c % k == 0) as u64;
                c /= k;
            }
            if h == total {
                count += &labelings;
            }
        }
        count
    }

    #[test]
    fn general_small_cases() {
        let one = count_sequences_general(&CountParams::new(5, 1, vec![5]).unwrap());
        assert_eq!(one, BigUint::one());
        let c = count_sequences_general(&CountParams::new(100, 7, vec![]).unwrap());
        assert_eq!(c, BigUint::from(6u32).pow(100));
        let c = count_sequences_general(&CountParams::new(4, 2, vec![1]).unwrap());
        assert_eq!(c, BigUint::from(4u32));
        assert!(CountParams::new(3, 2, vec![2, 2]).is_err());
        assert!(CountParams::new(3, 0, vec![]).is_err());
    }

    #[test]
    fn general_matches_enumeration() {
        for (n, k, rs) in [(6, 3, vec![1]), (7, 2, vec![2, 1]), (8, 4, vec![1, 1, 1]), (5, 3, vec![])] {
            let p = CountParams::new(n as u64, k, rs.clone()).unwrap();
            assert_eq!(count_sequences_general(&p), brute(n, k, &rs), "n={n} k={k} R={rs:?}");
        }
    }

    #[test]
    fn unit_counts() {
        assert_eq!(count_unit_exact(2, 0, CountMode::Formula).unwrap(), BigUint::from(100u32));
        assert_eq!(count_unit_exact(2, 2, CountMode::Formula).unwrap(), BigUint::from(970200u32));
        let c = count_unit_exact(10, 2, CountMode::Formula).unwrap();
        assert_eq!(c, BigUint::from(970200u32) * BigUint::from(9u32).pow(98));
        assert!(count_unit(2, 100, CountMode::Formula).is_err());
        assert!(count_unit(0, 1, CountMode::Formula).is_err());
        assert!(count_unit(1, 5, CountMode::Formula).unwrap().is_zero());
    }

    #[test]
    fn modes_differ_by_k_minus_one() {
        for k in [2, 5, 10, 100, 1100] {
            assert_eq!(
                count_unit_exact(k, 0, CountMode::Formula).unwrap(),
                count_unit_exact(k, 0, CountMode::Published).unwrap()
            );
            for r in [1, 2, 37, 98, 99] {
                let f = count_unit_exact(k, r, CountMode::Formula).unwrap();
                let p = count_unit_exact(k, r, CountMode::Published).unwrap();
                assert_eq!(f, p * BigUint::from(k - 1));
            }
        }
    }

    #[test]
    fn log_and_exact_agree() {
        for k in COUNT_COLUMNS_K {
            for r in (0..100).step_by(7) {
                let a = count_unit(k, r, CountMode::Published).unwrap();
                let b = LogReal::from_biguint(&count_unit_exact(k, r, CountMode::Published).unwrap());
                assert!((a.log10_magnitude() - b.log10_magnitude()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn measures() {
        assert_eq!(measure_unit(100).unwrap(), 0.0);
        assert!((measure_unit(0).unwrap() - 100.0).abs() < 1e-12);
        let f = LogReal::from_biguint(&falling_product(100, 50).unwrap());
        let want = (f * pow_logreal(2.0, -100).unwrap()).to_f64();
        assert!((measure_unit(50).unwrap() / want - 1.0).abs() < 1e-13);
        assert!((measure_general(10, &[10], 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(measure_unit(101).is_err());
        assert!(measure_general(10, &[3], 1.5).is_err());
    }

    #[test]
    fn binomial_measures_sum_to_one() {
        for p in [0.1, 0.37, 0.5, 0.9] {
            let s: f64 = (0..=12).map(|k| measure_general(12, &[k], p).unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn gaussian() {
        let g = gaussian_approx(100, 0.5).unwrap();
        assert_eq!((g.mean, g.sd, g.degenerate), (50.0, 5.0, false));
        let g = gaussian_approx(100, 0.1).unwrap();
        assert!((g.mean - 10.0).abs() < 1e-12 && (g.sd - 3.0).abs() < 1e-12);
        assert!(gaussian_approx(100, 1.0).unwrap().degenerate);
        assert!(three_sigma_mass(100, 0.5).unwrap() > 0.99);
    }

    #[test]
    fn rates() {
        // N(r)/N(r-1) = (100-r)/(K-1) in formula mode.
        for (k, r) in [(2, 1), (10, 50), (250, 3), (100, 99)] {
            let want = 1.0 - (k - 1) as f64 / (100 - r) as f64;
            assert!((relative_rate(k, r, CountMode::Formula).unwrap() - want).abs() < 1e-12);
        }
        assert!(relative_rate(2, 10, CountMode::Formula).unwrap() > 0.0);
        assert!(relative_rate(1100, 10, CountMode::Formula).unwrap() < 0.0);
        assert!(relative_rate(91, 10, CountMode::Formula).unwrap().abs() < 1e-12);
        assert!(relative_rate(1, 10, CountMode::Formula).is_err());
        assert!(relative_rate(5, 0, CountMode::Formula).is_err());
    }

    #[test]
    fn surface_omits_undefined() {
        let t = rate_surface(&[1, 2, 3], &[0, 1, 50, 99, 100], CountMode::Formula).unwrap();
        assert_eq!(t.n_rows(), 6);
        assert_eq!(t.metadata["omitted_cells"], "9");
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(&BigUint::from(100u32), 8), "1.0000000e2");
        assert_eq!(format_sig(&BigUint::from(9034502400u64), 8), "9.0345024e9");
        assert_eq!(format_sig(&BigUint::from(999999995u64), 8), "1.0000000e9");
        assert_eq!(format_sig(&BigUint::from(123454u64), 5), "1.2345e5");
        assert_eq!(format_sig(&BigUint::from(7u32), 1), "7e0");
    }

    #[test]
    fn table_shape() {
        let t = table1(CountMode::Published, false).unwrap();
        assert_eq!((t.n_rows(), t.columns.len()), (50, 6));
        let e = table1(CountMode::Published, true).unwrap();
        assert!(matches!(&e.rows[1][5], Cell::Exact(s) if s == "970200"));
    }

    proptest! {
        #[test]
        fn unit_is_general_with_ones(k in 1u64..50, r in 0u64..20) {
            let p = CountParams::new(100, k, vec![1; r as usize + 1]).unwrap();
            // r + 1 single placements, ordered, match the falling product.
            let g = count_sequences_general(&p);
            let want = falling_product(100, r).unwrap() * BigUint::from(k - 1).pow(99 - r as u32);
            prop_assert_eq!(g, want);
        }
    }
}
