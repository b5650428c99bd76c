//! Entropy bookkeeping for the four-piston Szilard cylinder and the
//! related-versus-random observer ensembles.
//!
//! A fraction fo of the molecules leaves the probed interval and fi enters
//! it; w1 is the probability of a molecule being inside the interval. The
//! entropy decrease per molecule is
//!
//! s = -k [ w1 a ln|a| + (1-w1) b ln|b| + (fo-fi) ln((1-w1)/w1) ],
//! a = 1 - (fo-fi)/w1, b = 1 + (fo-fi)/(1-w1),
//!
//! with w1 = erf(x/sqrt 2) when the interval is given by its half-width x.

use std::f64::consts::SQRT_2;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{domain, LabResult};
use crate::numerics::{erf, spearman, RngStream};
use crate::table::{Cell, DataTable};

/// Range of both fractions.
pub const F_MIN: f64 = 0.005;
pub const F_MAX: f64 = 0.5;
/// 50 values of fo times 121 values of fi.
pub const GRID_SIZE: usize = 50 * 121;
/// Experiments actually performed in each ensemble.
pub const PERFORMED: usize = 1000;

fn xlnx_abs(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * v.abs().ln()
    }
}

fn check_fraction(name: &str, f: f64) -> LabResult<()> {
    if !(0.0..=F_MAX).contains(&f) {
        return domain(format!("{name} must lie in [0, {F_MAX}], got {f}"));
    }
    Ok(())
}

pub fn entropy_diff(w1: f64, fo: f64, fi: f64, kb: f64) -> LabResult<f64> {
    if !(w1 > 0.0 && w1 < 1.0) {
        return domain(format!("w1 must lie in (0, 1), got {w1}"));
    }
    check_fraction("fo", fo)?;
    check_fraction("fi", fi)?;
    if w1 < fo {
        return domain(format!("w1 = {w1} is smaller than fo = {fo}"));
    }
    let d = fo - fi;
    let w2 = 1.0 - w1;
    let a = 1.0 - d / w1;
    let b = 1.0 + d / w2;
    Ok(-kb * (w1 * xlnx_abs(a) + w2 * xlnx_abs(b) + d * (w2 / w1).ln()))
}

pub fn w1_of_x(x: f64) -> f64 {
    erf(x / SQRT_2)
}

pub fn entropy_diff_erf(x: f64, fo: f64, fi: f64, kb: f64) -> LabResult<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return domain(format!("x must be finite and non-negative, got {x}"));
    }
    entropy_diff(w1_of_x(x), fo, fi, kb)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PistonExperiment {
    pub x: f64,
    pub fo: f64,
    pub fi: f64,
}

impl PistonExperiment {
    /// The interval half-width tied to the outgoing fraction, x = 6 fo.
    pub fn tied(fo: f64, fi: f64) -> Self {
        Self { x: 6.0 * fo, fo, fi }
    }

    pub fn entropy(&self, kb: f64) -> LabResult<f64> {
        entropy_diff_erf(self.x, self.fo, self.fi, kb)
    }
}

/// Total decrease sum_j n s_j for n molecules per experiment.
pub fn ensemble_entropy(experiments: &[PistonExperiment], molecules: f64, kb: f64) -> LabResult<f64> {
    experiments.iter().map(|e| Ok(molecules * e.entropy(kb)?)).sum()
}

/// fo_j = 0.005 + 0.495 j / 49.
pub fn fo_value(j: usize) -> f64 {
    F_MIN + (F_MAX - F_MIN) * j as f64 / 49.0
}

/// fi_l = 0.005 + 0.495 l / 120.
pub fn fi_value(l: usize) -> f64 {
    F_MIN + (F_MAX - F_MIN) * l as f64 / 120.0
}

/// The first `count` points of the related grid: fo from 0.5 downwards in the
/// outer loop, fi upwards in the inner loop, x = 6 fo. No two points share a
/// (fo, fi, x) triple.
pub fn related_grid(count: usize) -> LabResult<Vec<PistonExperiment>> {
    if count > GRID_SIZE {
        return domain(format!("the related grid holds {GRID_SIZE} points, asked for {count}"));
    }
    Ok((0..count).map(|i| PistonExperiment::tied(fo_value(49 - i / 121), fi_value(i % 121))).collect())
}

/// Which sign of s counts as an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trigger {
    Negative,
    Positive,
}

/// Denominator of the event fraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// Divide by the number of performed experiments.
    Performed,
    /// Divide by the ensemble size N.
    Ensemble,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IndicatorOutcome {
    pub events: usize,
    pub performed: usize,
    pub f: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IndicatorRule {
    pub trigger: Trigger,
    pub normalization: Normalization,
}

impl Default for IndicatorRule {
    fn default() -> Self {
        Self { trigger: Trigger::Negative, normalization: Normalization::Performed }
    }
}

/// g_i over the performed experiments and the fraction f.
pub fn fraction(
    performed: &[PistonExperiment],
    ensemble_size: usize,
    rule: IndicatorRule,
) -> LabResult<IndicatorOutcome> {
    if performed.len() > ensemble_size || performed.is_empty() {
        return domain("need 1 <= performed experiments <= ensemble size");
    }
    let mut events = 0;
    for e in performed {
        let s = e.entropy(1.0)?;
        events += match rule.trigger {
            Trigger::Negative => s < 0.0,
            Trigger::Positive => s > 0.0,
        } as usize;
    }
    let denom = match rule.normalization {
        Normalization::Performed => performed.len(),
        Normalization::Ensemble => ensemble_size,
    };
    Ok(IndicatorOutcome { events, performed: performed.len(), f: events as f64 / denom as f64 })
}

/// The performed subset of the first N related-grid points, spread evenly
/// over the ensemble.
pub fn related_performers(n: usize, performed: usize) -> LabResult<Vec<PistonExperiment>> {
    if performed > n {
        return domain(format!("cannot perform {performed} experiments in an ensemble of {n}"));
    }
    let grid = related_grid(n)?;
    Ok((0..performed).map(|i| grid[i * n / performed]).collect())
}

/// Performed experiments with fo and fi drawn uniformly from [0.005, 0.5],
/// one random stream per (N, i).
pub fn random_performers(seed: u64, n: usize, performed: usize) -> Vec<PistonExperiment> {
    (0..performed)
        .map(|i| {
            let mut rng = RngStream::new(seed, ((n as u64) << 32) | i as u64).rng();
            let fo = rng.gen_range(F_MIN..=F_MAX);
            let fi = rng.gen_range(F_MIN..=F_MAX);
            PistonExperiment::tied(fo, fi)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnsembleMode {
    Related,
    Random { seed: u64 },
}

/// Rows (N, f) over the ensemble sizes, with the Spearman correlation in the
/// metadata.
pub fn fraction_sweep(sizes: &[usize], mode: EnsembleMode, rule: IndicatorRule) -> LabResult<DataTable> {
    let out: Vec<LabResult<IndicatorOutcome>> = sizes
        .par_iter()
        .map(|&n| {
            let perf = match mode {
                EnsembleMode::Related => related_performers(n, PERFORMED.min(n))?,
                EnsembleMode::Random { seed } => random_performers(seed, n, PERFORMED.min(n)),
            };
            fraction(&perf, n, rule)
        })
        .collect();
    let mut table = DataTable::new(["N", "f"]).with_meta(
        "mode",
        match mode {
            EnsembleMode::Related => "related grid".to_string(),
            EnsembleMode::Random { seed } => format!("random, seed {seed}"),
        },
    );
    let mut fs = Vec::with_capacity(sizes.len());
    for (&n, o) in sizes.iter().zip(out) {
        let o = o?;
        fs.push(o.f);
        table.push_row(vec![Cell::from(n), o.f.into()])?;
    }
    let ns: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let rho = if sizes.len() >= 2 { spearman(&ns, &fs) } else { f64::NAN };
    Ok(table
        .with_meta("trigger", format!("{:?}", rule.trigger))
        .with_meta("normalization", format!("{:?}", rule.normalization))
        .with_meta("spearman", format!("{rho}")))
}

/// N = 1000, 1500, ..., 6000.
pub fn default_sizes() -> Vec<usize> {
    (1000..=6000).step_by(500).collect()
}

/// Spearman correlation of f with N for the given sweep.
pub fn sweep_correlation(sizes: &[usize], mode: EnsembleMode, rule: IndicatorRule) -> LabResult<f64> {
    let t = fraction_sweep(sizes, mode, rule)?;
    let ns: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    Ok(spearman(&ns, &t.column_f64("f").unwrap()))
}

/// Mean correlation and mean absolute correlation over random seeds.
pub fn random_correlation(seeds: &[u64], sizes: &[usize], rule: IndicatorRule) -> LabResult<(f64, f64)> {
    let rhos = seeds
        .iter()
        .map(|&seed| sweep_correlation(sizes, EnsembleMode::Random { seed }, rule))
        .collect::<LabResult<Vec<f64>>>()?;
    let n = rhos.len() as f64;
    Ok((rhos.iter().sum::<f64>() / n, rhos.iter().map(|r| r.abs()).sum::<f64>() / n))
}

/// s over an m x m grid of (fo, fi) in [0.005, 0.5]^2 at a fixed interval
/// half-width x.
pub fn surface(m: usize, x: f64) -> LabResult<DataTable> {
    if m < 2 {
        return domain("surface needs at least 2 points per axis");
    }
    if w1_of_x(x) < F_MAX {
        return domain(format!("x = {x} gives w1 below the largest fo"));
    }
    let axis: Vec<f64> = (0..m).map(|i| F_MIN + (F_MAX - F_MIN) * i as f64 / (m - 1) as f64).collect();
    let mut table = DataTable::new(["fo", "fi", "s"]).with_meta("x", x.to_string()).with_meta("k_B", "1");
    for &fo in &axis {
        for &fi in &axis {
            let s = entropy_diff_erf(x, fo, fi, 1.0)?;
            table.push_row(vec![fo.into(), fi.into(), s.into()])?;
        }
    }
    Ok(table)
}

/// Location and value of the extremes of a (fo, fi, s) surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extremes {
    pub max: (f64, f64, f64),
    pub min: (f64, f64, f64),
}

pub fn surface_extremes(table: &DataTable) -> Extremes {
    let (fo, fi, s) = (
        table.column_f64("fo").unwrap(),
        table.column_f64("fi").unwrap(),
        table.column_f64("s").unwrap(),
    );
    let mut max = (0.0, 0.0, f64::NEG_INFINITY);
    let mut min = (0.0, 0.0, f64::INFINITY);
    for i in 0..s.len() {
        if s[i] > max.2 {
            max = (fo[i], fi[i], s[i]);
        }
        if s[i] < min.2 {
            min = (fo[i], fi[i], s[i]);
        }
    }
    Extremes { max, min }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn locked_value() {
        let s = entropy_diff(0.3, 0.2, 0.05, 1.0).unwrap();
        assert!((s - -0.188_155_214_248_902_6).abs() < 1e-14);
    }

    #[test]
    fn zero_when_balanced() {
        for w1 in [0.01, 0.3, 0.5, 0.99] {
            for f in [0.0, 0.005, 0.2, 0.5] {
                if w1 >= f {
                    assert!(entropy_diff(w1, f, f, 1.0).unwrap().abs() < 1e-12);
                }
            }
        }
        let x = 2.0f64.sqrt() * 0.476_936_276_204_469_9;
        assert!((w1_of_x(x) - 0.5).abs() < 1e-14);
        assert!(entropy_diff_erf(x, 0.3, 0.3, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn preconditions() {
        assert!(entropy_diff(0.1, 0.2, 0.0, 1.0).is_err());
        assert!(entropy_diff(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(entropy_diff(0.5, 0.6, 0.0, 1.0).is_err());
        assert!(entropy_diff_erf(-1.0, 0.1, 0.1, 1.0).is_err());
        assert!((w1_of_x(3.0) - 0.997_300_203_936_739_8).abs() < 1e-14);
    }

    #[test]
    fn ensemble_is_additive() {
        let es = [
            PistonExperiment { x: 1.0, fo: 0.2, fi: 0.1 },
            PistonExperiment { x: 2.0, fo: 0.05, fi: 0.4 },
            PistonExperiment { x: 0.5, fo: 0.3, fi: 0.3 },
        ];
        let singles: f64 = es.iter().map(|e| e.entropy(1.0).unwrap()).sum();
        assert!((ensemble_entropy(&es, 10.0, 1.0).unwrap() - 10.0 * singles).abs() < 1e-12);
        assert_eq!(ensemble_entropy(&es[2..], 10.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn grid() {
        let g = related_grid(GRID_SIZE).unwrap();
        assert_eq!(fo_value(0), 0.005);
        assert!((fo_value(49) - 0.5).abs() < 1e-15);
        assert_eq!(g[0].x, 6.0 * g[0].fo);
        assert!((g[0].x - 3.0).abs() < 1e-14);
        let mut pairs: Vec<(u64, u64)> = g[..1000].iter().map(|e| (e.fo.to_bits(), e.fi.to_bits())).collect();
        pairs.sort();
        pairs.dedup();
        assert_eq!(pairs.len(), 1000);
        assert!(related_grid(GRID_SIZE + 1).is_err());
    }

    #[test]
    fn fraction_cases() {
        let same = vec![PistonExperiment::tied(0.2, 0.2); 5];
        assert_eq!(fraction(&same, 10, IndicatorRule::default()).unwrap().f, 0.0);
        let mixed = [PistonExperiment::tied(0.1, 0.4), PistonExperiment::tied(0.4, 0.1)];
        let o = fraction(&mixed, 4, IndicatorRule::default()).unwrap();
        assert_eq!((o.events, o.f), (1, 0.5));
        let rule = IndicatorRule { trigger: Trigger::Positive, normalization: Normalization::Ensemble };
        assert_eq!(fraction(&mixed, 4, rule).unwrap().f, 0.25);
    }

    #[test]
    fn related_trend_and_random_noise() {
        let rho = sweep_correlation(&default_sizes(), EnsembleMode::Related, IndicatorRule::default()).unwrap();
        assert!(rho > 0.9, "{rho}");
        let (mean, _) = random_correlation(&[1, 2, 3, 4, 5], &default_sizes(), IndicatorRule::default()).unwrap();
        assert!(mean.abs() < 0.5);
    }

    #[test]
    fn random_mode_is_reproducible() {
        assert_eq!(random_performers(7, 2000, 50), random_performers(7, 2000, 50));
        assert_ne!(random_performers(7, 2000, 50), random_performers(8, 2000, 50));
    }

    #[test]
    fn surface_signs() {
        let t = surface(100, 3.0).unwrap();
        let e = surface_extremes(&t);
        assert_eq!((e.max.0, e.max.1), (0.5, 0.005));
        assert_eq!((e.min.0, e.min.1), (0.005, 0.5));
        for row in &t.rows {
            let (fo, fi, s) = (row[0].as_f64(), row[1].as_f64(), row[2].as_f64());
            if fo != fi {
                assert_eq!(s > 0.0, fo > fi, "fo={fo} fi={fi} s={s}");
            }
        }
        assert!(surface(10, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn even_at_half(fo in 0.0f64..0.5, fi in 0.0f64..0.5) {
            // At w1 = 1/2 the log-ratio term drops out and what is left is
            // even in fo - fi and never positive.
            let a = entropy_diff(0.5, fo, fi, 1.0).unwrap();
            let b = entropy_diff(0.5, fi, fo, 1.0).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a <= 0.0);
        }

        #[test]
        fn root_only_at_balance(w1 in 0.55f64..0.99, fo in 0.0f64..0.5, fi in 0.0f64..0.5) {
            prop_assume!((fo - fi).abs() > 1e-6);
            prop_assert!(entropy_diff(w1, fo, fi, 1.0).unwrap() != 0.0);
        }
    }
}
