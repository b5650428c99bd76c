//! Diffusion through n imperfect traps: the 4n interface-matching equations,
//! their solution and the transmitted coefficient V.
//!
//! At small t the basis functions and their derivatives span thousands of
//! decades, so the system is assembled in `LogReal`. A chain solve in the log
//! domain gives a first solution, which is used to equilibrate rows and
//! columns; the equilibrated system then fits in f64 and is solved with
//! partial pivoting for the reported residual and condition estimate.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::band::{inverse_norm1_estimate, BandLu, BandMatrix, DenseLu, Factorization};
use crate::error::{domain, LabError, LabResult};
use crate::numerics::{erf, erfcx, LogReal};
use crate::table::{Cell, DataTable};

const KL: usize = 2;
const KU: usize = 1;
const DENSE_LIMIT: usize = 4000;
pub const ILL_CONDITIONED: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrapSystem {
    pub n: usize,
    /// Total trap width.
    pub a: f64,
    /// Total gap width.
    pub b: f64,
    pub de: f64,
    pub di: f64,
    pub k: f64,
    pub t: f64,
}

impl TrapSystem {
    pub fn new(n: usize, a: f64, b: f64, de: f64, di: f64, k: f64, t: f64) -> LabResult<Self> {
        let s = Self { n, a, b, de, di, k, t };
        s.validate()?;
        Ok(s)
    }

    /// k = 1, De = 0.5, Di = 0.1, b = a/2.
    pub fn reference(n: usize, a: f64, t: f64) -> LabResult<Self> {
        Self::new(n, a, a / 2.0, 0.5, 0.1, 1.0, t)
    }

    pub fn validate(&self) -> LabResult<()> {
        if self.n == 0 {
            return domain("trap count must be at least 1");
        }
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.a) || !(self.b >= 0.0 && self.b.is_finite()) {
            return domain(format!("need a > 0 and b >= 0, got a={}, b={}", self.a, self.b));
        }
        if !pos(self.de) || !pos(self.di) || !pos(self.k) {
            return domain("diffusion constants and k must be positive");
        }
        if !pos(self.t) {
            return domain(format!("time must be positive, got {}", self.t));
        }
        Ok(())
    }

    /// Entry and exit face of trap j.
    pub fn faces(&self, j: usize) -> (f64, f64) {
        let n = self.n as f64;
        let j = j as f64;
        ((j * self.a + (j + 1.0) * self.b) / n, (j + 1.0) * (self.a + self.b) / n)
    }

    pub fn dim(&self) -> usize {
        4 * self.n
    }
}

/// The two density components and their x-derivatives.
pub trait DensityBasis: Sync {
    /// Ideal-trap component.
    fn rho1(&self, d: f64, x: f64, t: f64) -> LogReal;
    fn rho1_dx(&self, d: f64, x: f64, t: f64) -> LogReal;
    /// Imperfect-trap component.
    fn rho2(&self, d: f64, x: f64, t: f64) -> LogReal;
    fn rho2_dx(&self, d: f64, x: f64, t: f64) -> LogReal;
    fn label(&self) -> String;
}

/// rho1 = erf(x / 2 sqrt(Dt)),
/// rho2 = erf(x / 2 sqrt(Dt)) + exp(kx + k^2 Dt) erfc(x / 2 sqrt(Dt) + k sqrt(Dt)).
///
/// With u = x / 2 sqrt(Dt) and w = u + k sqrt(Dt), the exponential times
/// erfc equals erfcx(w) e^{-u^2}, which stays finite for any x and t.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DefaultBasis {
    pub k: f64,
}

impl DefaultBasis {
    pub fn new(k: f64) -> LabResult<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return domain(format!("k must be positive, got {k}"));
        }
        Ok(Self { k })
    }

    fn uw(&self, d: f64, x: f64, t: f64) -> (f64, f64) {
        let s = (d * t).sqrt();
        let u = x / (2.0 * s);
        (u, u + self.k * s)
    }
}

impl DensityBasis for DefaultBasis {
    fn rho1(&self, d: f64, x: f64, t: f64) -> LogReal {
        LogReal::from_f64(erf(x / (2.0 * (d * t).sqrt())))
    }

    fn rho1_dx(&self, d: f64, x: f64, t: f64) -> LogReal {
        let (u, _) = self.uw(d, x, t);
        LogReal::from_ln(1, -u * u - 0.5 * (PI * d * t).ln())
    }

    fn rho2(&self, d: f64, x: f64, t: f64) -> LogReal {
        let (u, w) = self.uw(d, x, t);
        let tail = LogReal::from_f64(erfcx(w)) * LogReal::from_ln(1, -u * u);
        LogReal::from_f64(erf(u)).add(tail)
    }

    fn rho2_dx(&self, d: f64, x: f64, t: f64) -> LogReal {
        let (u, w) = self.uw(d, x, t);
        LogReal::from_f64(self.k * erfcx(w)) * LogReal::from_ln(1, -u * u)
    }

    fn label(&self) -> String {
        format!("reconstructed basis: erf and erf + exp(kx+k^2Dt) erfc, k={}", self.k)
    }
}

/// Values of both components and derivatives at one point.
#[derive(Clone, Copy, Debug)]
struct Point {
    r1x: LogReal,
    r2: LogReal,
    r2x: LogReal,
}

fn eval(basis: &dyn DensityBasis, d: f64, x: f64, t: f64) -> Point {
    Point {
        r1x: basis.rho1_dx(d, x, t),
        r2: basis.rho2(d, x, t),
        r2x: basis.rho2_dx(d, x, t),
    }
}

/// Basis values on both sides of every face.
struct FaceValues {
    /// (exterior, interior) at the entry face of each trap.
    left: Vec<(Point, Point)>,
    right: Vec<(Point, Point)>,
}

impl FaceValues {
    fn new(sys: &TrapSystem, basis: &dyn DensityBasis) -> Self {
        let side = |x: f64| (eval(basis, sys.de, x, sys.t), eval(basis, sys.di, x, sys.t));
        let (left, right) = (0..sys.n)
            .map(|j| {
                let (xl, xr) = sys.faces(j);
                (side(xl), side(xr))
            })
            .unzip();
        Self { left, right }
    }
}

/// The assembled system N x = c. Unknowns are ordered
/// (B, C, D, E, F, ..., T, U, V): the reflected ideal coefficient, then for
/// each trap its imperfect and ideal interior coefficients followed by the
/// next gap's imperfect and ideal coefficients; the ideal term beyond the
/// last trap is dropped. Row i only touches columns i-2..=i+1.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    n: usize,
    /// Entries at columns i-2, i-1, i, i+1.
    rows: Vec<[LogReal; 4]>,
    rhs: [LogReal; 2],
}

impl AssembledSystem {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> LogReal {
        if j + KL < i || j > i + KU {
            return LogReal::ZERO;
        }
        self.rows[i][j + KL - i]
    }

    pub fn rhs(&self, i: usize) -> LogReal {
        if i < 2 {
            self.rhs[i]
        } else {
            LogReal::ZERO
        }
    }

    /// Largest |i - j| over nonzero entries.
    pub fn bandwidth(&self) -> usize {
        let mut w = 0;
        for i in 0..self.n {
            for j in i.saturating_sub(KL)..=(i + KU).min(self.n - 1) {
                if !self.get(i, j).is_zero() {
                    w = w.max(i.abs_diff(j));
                }
            }
        }
        w
    }

    fn set(&mut self, i: usize, j: isize, v: LogReal) {
        if j >= 0 && (j as usize) < self.n {
            self.rows[i][(j - i as isize + KL as isize) as usize] = v;
        }
    }
}

pub fn assemble(sys: &TrapSystem, basis: &dyn DensityBasis) -> LabResult<AssembledSystem> {
    sys.validate()?;
    let fv = FaceValues::new(sys, basis);
    Ok(assemble_from(sys, &fv))
}

fn assemble_from(sys: &TrapSystem, fv: &FaceValues) -> AssembledSystem {
    let dim = sys.dim();
    let mut m = AssembledSystem { n: dim, rows: vec![[LogReal::ZERO; 4]; dim], rhs: [LogReal::ZERO; 2] };
    for j in 0..sys.n {
        let (e, i) = fv.left[j];
        let (p, q, c, d) = (4 * j as isize - 1, 4 * j as isize, 4 * j as isize + 1, 4 * j as isize + 2);
        let r = 4 * j;
        // Density of the imperfect component at the entry face.
        m.set(r, p, e.r2);
        m.set(r, c, -i.r2);
        // Flux at the entry face.
        m.set(r + 1, p, e.r2x);
        m.set(r + 1, q, e.r1x);
        m.set(r + 1, c, -i.r2x);
        m.set(r + 1, d, -i.r1x);
        if j == 0 {
            // The incident imperfect coefficient is 1 and moves to the rhs.
            m.rhs = [-e.r2, -e.r2x];
        }
        let (e, i) = fv.right[j];
        m.set(r + 2, c, i.r2);
        m.set(r + 2, p + 4, -e.r2);
        m.set(r + 3, c, i.r2x);
        m.set(r + 3, d, i.r1x);
        m.set(r + 3, p + 4, -e.r2x);
        if j + 1 < sys.n {
            m.set(r + 3, q + 4, -e.r1x);
        }
    }
    m
}

/// Chain solution in the log domain: the density rows fix every imperfect
/// coefficient from the left, the flux rows then fix the ideal ones from the
/// right.
fn chain_solve(sys: &TrapSystem, fv: &FaceValues) -> LabResult<Vec<LogReal>> {
    let n = sys.n;
    let mut x = vec![LogReal::ZERO; 4 * n];
    let nonzero = |v: LogReal, what: &str| -> LabResult<LogReal> {
        if v.is_zero() {
            Err(LabError::Numerical(format!("basis value {what} vanishes at an interface")))
        } else {
            Ok(v)
        }
    };
    // p[j] is the imperfect coefficient of gap j, p[0] = 1 incident.
    let mut p = vec![LogReal::ONE; n + 1];
    let mut c = vec![LogReal::ZERO; n];
    for j in 0..n {
        let (e, i) = fv.left[j];
        c[j] = p[j] * e.r2 / nonzero(i.r2, "rho2")?;
        let (e, i) = fv.right[j];
        p[j + 1] = c[j] * i.r2 / nonzero(e.r2, "rho2")?;
    }
    let mut q = vec![LogReal::ZERO; n + 1];
    let mut d = vec![LogReal::ZERO; n];
    for j in (0..n).rev() {
        let (e, i) = fv.right[j];
        let k3 = (p[j + 1] * e.r2x).sub(c[j] * i.r2x);
        d[j] = k3.add(q[j + 1] * e.r1x) / nonzero(i.r1x, "rho1'")?;
        let (e, i) = fv.left[j];
        let k1 = (c[j] * i.r2x).sub(p[j] * e.r2x);
        q[j] = k1.add(d[j] * i.r1x) / nonzero(e.r1x, "rho1'")?;
    }
    x[0] = q[0];
    for j in 0..n {
        x[4 * j + 1] = c[j];
        x[4 * j + 2] = d[j];
        x[4 * j + 3] = p[j + 1];
        if j + 1 < n {
            x[4 * j + 4] = q[j + 1];
        }
    }
    Ok(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    /// Dense up to 4000 unknowns, banded above.
    Auto,
    Dense,
    Banded,
}

#[derive(Clone, Debug)]
pub struct TrapSolution {
    /// (B, C, D, ..., T, U, V).
    pub coefficients: Vec<LogReal>,
    pub v: f64,
    /// ||N y - c||_inf / ||c||_inf of the equilibrated system.
    pub residual: f64,
    /// 1-norm condition estimate of the equilibrated matrix.
    pub condition_estimate: f64,
    pub ill_conditioned: bool,
    /// Largest relative disagreement between the pivoted solve and the chain
    /// solution.
    pub structured_discrepancy: f64,
}

pub fn solve(sys: &TrapSystem, basis: &dyn DensityBasis) -> LabResult<TrapSolution> {
    solve_with(sys, basis, SolverKind::Auto)
}

pub fn solve_with(sys: &TrapSystem, basis: &dyn DensityBasis, kind: SolverKind) -> LabResult<TrapSolution> {
    sys.validate()?;
    let fv = FaceValues::new(sys, basis);
    let m = assemble_from(sys, &fv);
    let x0 = chain_solve(sys, &fv)?;
    let dim = m.dim();

    let col: Vec<LogReal> = x0.iter().map(|v| if v.is_zero() { LogReal::ONE } else { v.abs() }).collect();
    let mut row_scale = vec![LogReal::ZERO; dim];
    for (i, rs) in row_scale.iter_mut().enumerate() {
        let mut best = m.rhs(i).abs();
        for j in i.saturating_sub(KL)..=(i + KU).min(dim - 1) {
            let v = (m.get(i, j) * col[j]).abs();
            if v.cmp_magnitude(best).is_gt() {
                best = v;
            }
        }
        if best.is_zero() {
            return Err(LabError::Numerical(format!("row {i} of the trap system is empty")));
        }
        *rs = best;
    }
    let scaled = |i: usize, j: usize| (m.get(i, j) * col[j] / row_scale[i]).to_f64();
    let rhs: Vec<f64> = (0..dim).map(|i| (m.rhs(i) / row_scale[i]).to_f64()).collect();

    let mut band = BandMatrix::zeros(dim, KL, KU);
    for i in 0..dim {
        for j in i.saturating_sub(KL)..=(i + KU).min(dim - 1) {
            band.set(i, j, scaled(i, j));
        }
    }
    let use_dense = match kind {
        SolverKind::Auto => dim <= DENSE_LIMIT,
        SolverKind::Dense => true,
        SolverKind::Banded => false,
    };
    let lu: Box<dyn Factorization> = if use_dense {
        Box::new(DenseLu::factor(DMatrix::from_fn(dim, dim, |i, j| band.get(i, j)))?)
    } else {
        Box::new(BandLu::factor(band.clone())?)
    };
    let mut y = rhs.clone();
    lu.solve(&mut y);
    if y.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Numerical("trap solve produced non-finite values".into()));
    }

    let ny = band.mul_vec(&y);
    let rnorm = ny.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let cnorm = rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let residual = rnorm / cnorm;
    let condition_estimate = band.norm1() * inverse_norm1_estimate(lu.as_ref());
    let ill_conditioned = !(condition_estimate <= ILL_CONDITIONED);
    if ill_conditioned {
        log::warn!("trap system n={} t={} is ill-conditioned (estimate {condition_estimate:e})", sys.n, sys.t);
    }
    let structured_discrepancy = y
        .iter()
        .zip(&x0)
        .map(|(yj, xj)| (yj - if xj.is_zero() { 0.0 } else { xj.sign() as f64 }).abs())
        .fold(0.0, f64::max);

    let coefficients: Vec<LogReal> = y.iter().zip(&col).map(|(&yj, &cj)| LogReal::from_f64(yj) * cj).collect();
    let v = coefficients[dim - 1].to_f64();
    Ok(TrapSolution { coefficients, v, residual, condition_estimate, ill_conditioned, structured_discrepancy })
}

/// Grid for a one-parameter sweep.
#[derive(Clone, Debug, PartialEq)]
pub enum Sweep {
    N(Vec<usize>),
    T(Vec<f64>),
    /// Total trap width; the gap keeps its ratio b/a.
    A(Vec<f64>),
}

impl Sweep {
    fn name(&self) -> &'static str {
        match self {
            Sweep::N(_) => "n",
            Sweep::T(_) => "t",
            Sweep::A(_) => "a",
        }
    }

    fn points(&self, template: &TrapSystem) -> Vec<(Cell, TrapSystem)> {
        let ratio = template.b / template.a;
        match self {
            Sweep::N(v) => v.iter().map(|&n| (Cell::from(n), TrapSystem { n, ..*template })).collect(),
            Sweep::T(v) => v.iter().map(|&t| (Cell::from(t), TrapSystem { t, ..*template })).collect(),
            Sweep::A(v) => {
                v.iter().map(|&a| (Cell::from(a), TrapSystem { a, b: a * ratio, ..*template })).collect()
            }
        }
    }
}

pub fn sweep(template: &TrapSystem, basis: &dyn DensityBasis, over: &Sweep) -> LabResult<DataTable> {
    let points = over.points(template);
    if points.is_empty() {
        return domain("sweep grid is empty");
    }
    let results: Vec<LabResult<TrapSolution>> = points.par_iter().map(|(_, s)| solve(s, basis)).collect();
    let mut table = DataTable::new([over.name(), "V", "condition_estimate", "residual"])
        .with_meta("basis", basis.label())
        .with_meta(
            "parameters",
            format!(
                "n={}, a={}, b={}, De={}, Di={}, k={}, t={}",
                template.n, template.a, template.b, template.de, template.di, template.k, template.t
            ),
        );
    let mut flagged = 0;
    for ((var, _), r) in points.into_iter().zip(results) {
        let r = r?;
        flagged += r.ill_conditioned as usize;
        table.push_row(vec![var, r.v.into(), r.condition_estimate.into(), r.residual.into()])?;
    }
    Ok(table.with_meta("ill_conditioned_points", flagged.to_string()))
}
