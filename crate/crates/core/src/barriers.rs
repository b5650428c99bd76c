//! Transmission through n rectangular barriers of total width a and total
//! gap b packed into [0, a + b], by transfer matrices. Units hbar = 1 and
//! 2m = 1, so the outside wavenumber is sqrt(e).
//!
//! Opaque slabs have entries of size e^{kappa w}, and the determinant of a
//! plain `f64` product drifts by roughly eps |M|^2. Each slab is therefore
//! built exactly unimodular and the product is accumulated in double-double
//! arithmetic.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{domain, LabResult};
use crate::table::{Cell, DataTable};

/// Order of slabs inside the interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    /// barrier, gap, barrier, gap, ..., barrier, gap
    BarrierFirst,
    /// gap, barrier, gap, barrier, ..., gap, barrier
    GapFirst,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarrierSystem {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub e: f64,
    pub v: f64,
    pub layout: Layout,
}

impl BarrierSystem {
    pub fn new(n: usize, a: f64, b: f64, e: f64, v: f64) -> LabResult<Self> {
        let all_finite = [a, b, e, v].iter().all(|x| x.is_finite());
        if !all_finite || !(a > 0.0) || !(b >= 0.0) || !(e > 0.0) || !(v >= 0.0) {
            return domain(format!("barrier system needs a > 0, b >= 0, e > 0, v >= 0; got a={a}, b={b}, e={e}, v={v}"));
        }
        Ok(Self { n, a, b, e, v, layout: Layout::BarrierFirst })
    }

    /// Builds the system from the gap-to-barrier ratio c = b / a.
    pub fn with_ratio(n: usize, a: f64, c: f64, e: f64, v: f64) -> LabResult<Self> {
        Self::new(n, a, c * a, e, v)
    }

    pub fn with_layout(mut self, layout: Layout) -> Self {
        self.layout = layout;
        self
    }

    pub fn ratio(&self) -> f64 {
        self.b / self.a
    }

    pub fn k(&self) -> f64 {
        self.e.sqrt()
    }

    /// (potential, width) of every slab from left to right.
    pub fn slabs(&self) -> Vec<(f64, f64)> {
        let wb = self.a / self.n as f64;
        let wg = self.b / self.n as f64;
        let mut out = Vec::with_capacity(2 * self.n);
        for _ in 0..self.n {
            match self.layout {
                Layout::BarrierFirst => {
                    out.push((self.v, wb));
                    out.push((0.0, wg));
                }
                Layout::GapFirst => {
                    out.push((0.0, wg));
                    out.push((self.v, wb));
                }
            }
        }
        out
    }
}

/// Double-double number hi + lo with |lo| <= ulp(hi)/2.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    fn quick(hi: f64, lo: f64) -> Self {
        let s = hi + lo;
        Dd { hi: s, lo: lo - (s - hi) }
    }

    fn add(self, o: Dd) -> Dd {
        let (s, e) = Self::two_sum(self.hi, o.hi);
        let (t, f) = Self::two_sum(self.lo, o.lo);
        let e = e + t;
        let r = Self::quick(s, e);
        Self::quick(r.hi, r.lo + f)
    }

    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Self::quick(p, e + (self.hi * o.lo + self.lo * o.hi))
    }

    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Dd::from(q1)));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul(Dd::from(q2)));
        let q3 = r.hi / o.hi;
        Self::quick(q1, q2).add(Dd::from(q3))
    }

    fn scale(self, x: f64) -> Dd {
        self.mul(Dd::from(x))
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

type RealMat = [[Dd; 2]; 2];

fn mat_mul(x: &RealMat, y: &RealMat) -> RealMat {
    let mut out = [[Dd::ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = x[i][0].mul(y[0][j]).add(x[i][1].mul(y[1][j]));
        }
    }
    out
}

/// Propagator of (psi, psi') across a slab of width `w` where the local
/// kinetic term is e - v. One entry is recomputed so that the slab
/// determinant is 1 to double-double precision.
fn slab_matrix(e: f64, v: f64, w: f64) -> LabResult<RealMat> {
    let d = v - e;
    if d == 0.0 {
        return domain("energy equals the barrier height; the linear-solution slab is not supported");
    }
    let (m11, m12, m21) = if d > 0.0 {
        let kappa = d.sqrt();
        let (s, c) = ((kappa * w).sinh(), (kappa * w).cosh());
        (c, s / kappa, kappa * s)
    } else {
        let q = (-d).sqrt();
        let (s, c) = (q * w).sin_cos();
        (c, s / q, -q * s)
    };
    let (m11, m12, m21) = (Dd::from(m11), Dd::from(m12), Dd::from(m21));
    if m11.hi.abs() >= std::f64::consts::FRAC_1_SQRT_2 {
        // cosh (or |cos| large): m22 = (1 + m12 m21) / m11
        let m22 = Dd::ONE.add(m12.mul(m21)).div(m11);
        Ok([[m11, m12], [m21, m22]])
    } else {
        // |sin| large: keep m22 = m11 and solve for m21 = (m11 m22 - 1) / m12
        let m22 = m11;
        let m21 = m11.mul(m22).sub(Dd::ONE).div(m12);
        Ok([[m11, m12], [m21, m22]])
    }
}

/// Product of slab propagators in the (psi, psi') basis, plus the outside
/// wavenumber used to express it in the plane-wave basis.
#[derive(Clone, Copy, Debug)]
pub struct TransferMatrix {
    real: RealMat,
    k: f64,
}

impl TransferMatrix {
    /// Plane-wave form S^-1 M S with S = [[1, 1], [ik, -ik]], mapping the
    /// (right-moving, left-moving) amplitudes on the left to those on the
    /// right.
    pub fn plane_wave(&self) -> [[C64; 2]; 2] {
        let (a, b, c, d) = self.abcd();
        let (a, b, c, d) = (a.to_f64(), b.to_f64(), c.to_f64(), d.to_f64());
        [
            [C64::new(0.5 * a, 0.5 * b), C64::new(0.5 * c, -0.5 * d)],
            [C64::new(0.5 * c, 0.5 * d), C64::new(0.5 * a, -0.5 * b)],
        ]
    }

    /// A = M11 + M22, B = k M12 - M21/k, C = M11 - M22, D = k M12 + M21/k.
    fn abcd(&self) -> (Dd, Dd, Dd, Dd) {
        let m = &self.real;
        let km12 = m[0][1].scale(self.k);
        let m21k = m[1][0].div(Dd::from(self.k));
        (m[0][0].add(m[1][1]), km12.sub(m21k), m[0][0].sub(m[1][1]), km12.add(m21k))
    }

    /// Determinant of the plane-wave matrix, ((A^2 + B^2) - (C^2 + D^2)) / 4,
    /// evaluated in double-double. It is real for a real potential.
    pub fn determinant(&self) -> f64 {
        let (a, b, c, d) = self.abcd();
        let plus = a.mul(a).add(b.mul(b));
        let minus = c.mul(c).add(d.mul(d));
        plus.sub(minus).scale(0.25).to_f64()
    }

    /// Entries of the (psi, psi') propagator rounded to `f64`.
    pub fn real(&self) -> [[f64; 2]; 2] {
        let m = &self.real;
        [[m[0][0].to_f64(), m[0][1].to_f64()], [m[1][0].to_f64(), m[1][1].to_f64()]]
    }
}

/// Ordered product of slab matrices over the whole interval. With n = 0
/// there are no slabs and the result is the identity.
pub fn transfer_matrix(sys: &BarrierSystem) -> LabResult<TransferMatrix> {
    if sys.e == sys.v && sys.n > 0 {
        return domain("energy equals the barrier height; the linear-solution slab is not supported");
    }
    let mut m: RealMat = [[Dd::ONE, Dd::ZERO], [Dd::ZERO, Dd::ONE]];
    for (v, w) in sys.slabs() {
        if w == 0.0 {
            continue;
        }
        m = mat_mul(&slab_matrix(sys.e, v, w)?, &m);
    }
    Ok(TransferMatrix { real: m, k: sys.k() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScatteringResult {
    pub t_amp: C64,
    pub r_amp: C64,
    pub transmission: f64,
    pub reflection: f64,
}

/// Scattering of a wave incident from the left: t = 1/P22, r = -P21/P22 for
/// the plane-wave matrix P.
pub fn transmission(sys: &BarrierSystem) -> LabResult<ScatteringResult> {
    let p = transfer_matrix(sys)?.plane_wave();
    let t_amp = C64::new(1.0, 0.0) / p[1][1];
    let r_amp = -p[1][0] / p[1][1];
    Ok(ScatteringResult { t_amp, r_amp, transmission: t_amp.norm_sqr(), reflection: r_amp.norm_sqr() })
}

/// Rows (n, T, R) for each barrier count at fixed a, b, e, v. The metadata
/// records whether T increases along the list.
pub fn sweep_n(template: &BarrierSystem, n_list: &[usize]) -> LabResult<DataTable> {
    if n_list.is_empty() {
        return domain("n list is empty");
    }
    let results: Vec<LabResult<ScatteringResult>> = n_list
        .par_iter()
        .map(|&n| transmission(&BarrierSystem { n, ..*template }))
        .collect();
    let mut table = DataTable::new(["n", "T", "R"])
        .with_meta("units", "hbar=1, 2m=1, k=sqrt(e)")
        .with_meta("layout", format!("{:?}", template.layout))
        .with_meta("parameters", format!("a={}, b={}, e={}, v={}", template.a, template.b, template.e, template.v));
    let mut ts = Vec::with_capacity(n_list.len());
    for (&n, r) in n_list.iter().zip(results) {
        let r = r?;
        ts.push(r.transmission);
        table.push_row(vec![Cell::from(n), r.transmission.into(), r.reflection.into()])?;
    }
    let increasing = ts.windows(2).all(|w| w[1] > w[0]);
    Ok(table.with_meta("increasing_in_n", increasing.to_string()))
}
