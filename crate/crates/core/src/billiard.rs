//! Event-driven billiard between two concentric circles with a small hole in
//! the outer one. Each particle flies on straight chords at constant speed
//! and reflects specularly off both circles. A chord that reaches the inner
//! circle belongs to State1 and one that misses it belongs to State2.
//! Particles may be switched between the two classes after a set number of
//! reflections, and the escape times through the hole give the activity
//! curve.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{domain, LabError, LabResult};
use crate::numerics::{Histogram, RngStream};
use crate::table::DataTable;

/// Discriminants closer to zero than this are treated as grazing the inner
/// circle.
const GRAZE: f64 = 1e-12;
/// Launch angles are kept this far from tangency.
const TANGENT_GUARD: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MotionClass {
    /// Reflects between both circles.
    State1,
    /// Reflects off the outer circle only.
    State2,
}

impl MotionClass {
    pub fn other(self) -> Self {
        match self {
            MotionClass::State1 => MotionClass::State2,
            MotionClass::State2 => MotionClass::State1,
        }
    }
}

/// How the initial direction is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Launch {
    /// Uniform over inward angles; the class follows from the geometry.
    Random,
    /// Uniform over the inward angles of one class.
    Forced(MotionClass),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BilliardConfig {
    pub r1: f64,
    pub r2: f64,
    /// Arc length of the hole.
    pub hole_width: f64,
    /// Angle of the hole centre.
    pub hole_center: f64,
    pub speed: f64,
    pub n_particles: u64,
    /// Reflections spent in State1 before moving to State2; `None` is never.
    pub switch_1to2: Option<u64>,
    pub switch_2to1: Option<u64>,
    /// Count inner-circle reflections towards a switch as well.
    pub count_inner: bool,
    pub launch: Launch,
    pub bin_width: f64,
    pub max_time: f64,
    pub seed: u64,
}

impl Default for BilliardConfig {
    fn default() -> Self {
        Self {
            r1: 6.0,
            r2: 3.0,
            hole_width: 0.15,
            hole_center: 0.0,
            speed: 3.0,
            n_particles: 100_000,
            switch_1to2: None,
            switch_2to1: None,
            count_inner: false,
            launch: Launch::Random,
            bin_width: 60.0,
            max_time: 600.0,
            seed: 1,
        }
    }
}

impl BilliardConfig {
    pub fn validate(&self) -> LabResult<()> {
        if !(self.r2 > 0.0 && self.r1 > self.r2 && self.r1.is_finite()) {
            return domain(format!("need r1 > r2 > 0, got r1={}, r2={}", self.r1, self.r2));
        }
        if !(self.hole_width >= 0.0 && self.hole_width < TAU * self.r1) {
            return domain(format!("hole width must lie in [0, 2 pi r1), got {}", self.hole_width));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return domain("speed must be positive");
        }
        if !(self.bin_width > 0.0) || !(self.max_time > 0.0) || !self.max_time.is_finite() {
            return domain("bin width and max time must be positive");
        }
        if self.switch_1to2 == Some(0) || self.switch_2to1 == Some(0) {
            return domain("switch counts must be at least 1");
        }
        if !self.hole_center.is_finite() {
            return domain("hole centre must be finite");
        }
        Ok(())
    }

    fn hole_half_angle(&self) -> f64 {
        self.hole_width / (2.0 * self.r1)
    }

    /// Largest launch angle from the inward normal that still reaches the
    /// inner circle.
    pub fn critical_angle(&self) -> f64 {
        (self.r2 / self.r1).asin()
    }

    fn in_hole(&self, p: [f64; 2]) -> bool {
        let mut d = p[1].atan2(p[0]) - self.hole_center;
        d = (d + PI).rem_euclid(TAU) - PI;
        d.abs() <= self.hole_half_angle()
    }

    fn switch_after(&self, class: MotionClass) -> Option<u64> {
        match class {
            MotionClass::State1 => self.switch_1to2,
            MotionClass::State2 => self.switch_2to1,
        }
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

fn scale(a: [f64; 2], s: f64) -> [f64; 2] {
    [a[0] * s, a[1] * s]
}

fn rotate(a: [f64; 2], theta: f64) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [c * a[0] - s * a[1], s * a[0] + c * a[1]]
}

/// State1 iff the ray points inward and its impact parameter |p x d| is
/// below r2; an impact parameter of exactly r2 counts as State2.
pub fn classify(position: [f64; 2], direction: [f64; 2], r2: f64) -> LabResult<MotionClass> {
    let n = norm(direction);
    if !(n > 0.0) || !n.is_finite() {
        return domain("direction must be a nonzero finite vector");
    }
    let d = scale(direction, 1.0 / n);
    if dot(position, d) < 0.0 && cross(position, d).abs() < r2 {
        Ok(MotionClass::State1)
    } else {
        Ok(MotionClass::State2)
    }
}

/// Inward launch angle, measured from the inward normal, for a class.
fn sample_angle(rng: &mut ChaCha8Rng, class: Option<MotionClass>, critical: f64) -> f64 {
    let limit = FRAC_PI_2 - TANGENT_GUARD;
    match class {
        None => rng.gen_range(-limit..limit),
        Some(MotionClass::State1) => rng.gen_range(-critical..critical),
        Some(MotionClass::State2) => {
            let m = rng.gen_range(critical..limit);
            if rng.gen::<bool>() { m } else { -m }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParticleState {
    pub position: [f64; 2],
    pub direction: [f64; 2],
    pub class: MotionClass,
    pub reflections_since_switch: u64,
    pub elapsed_time: f64,
    /// Total path length flown.
    pub path_length: f64,
    on_outer: bool,
}

/// What happened at the next wall contact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Event {
    Outer { chord: f64, switched: bool },
    Inner { chord: f64 },
    Escape { time: f64 },
}

impl ParticleState {
    fn on_outer(position: [f64; 2], theta: f64, class: MotionClass) -> Self {
        let inward = scale(position, -1.0 / norm(position));
        Self {
            position,
            direction: rotate(inward, theta),
            class,
            reflections_since_switch: 0,
            elapsed_time: 0.0,
            path_length: 0.0,
            on_outer: true,
        }
    }

    /// Launch point uniform on the outer circle outside the hole.
    pub fn launch(cfg: &BilliardConfig, rng: &mut ChaCha8Rng) -> Self {
        let half = cfg.hole_half_angle();
        let phi = cfg.hole_center + rng.gen_range(half..TAU - half);
        let p = [cfg.r1 * phi.cos(), cfg.r1 * phi.sin()];
        let critical = cfg.critical_angle();
        let (theta, class) = match cfg.launch {
            Launch::Random => {
                let t = sample_angle(rng, None, critical);
                (t, if t.abs() < critical { MotionClass::State1 } else { MotionClass::State2 })
            }
            Launch::Forced(c) => (sample_angle(rng, Some(c), critical), c),
        };
        Self::on_outer(p, theta, class)
    }

    /// Flies to the next wall, reflects, and applies escape and switching
    /// rules. Escape is only possible at the outer circle.
    pub fn step(&mut self, cfg: &BilliardConfig, rng: &mut ChaCha8Rng, escapes: bool) -> Event {
        let b = dot(self.position, self.direction);
        let (chord, radius) = if self.on_outer {
            let disc = b * b - (cfg.r1 * cfg.r1 - cfg.r2 * cfg.r2);
            if disc.abs() < GRAZE {
                log::trace!("graze of the inner circle at {:?}", self.position);
            }
            if disc > GRAZE && b < 0.0 {
                (-b - disc.sqrt(), cfg.r2)
            } else {
                (-2.0 * b, cfg.r1)
            }
        } else {
            (-b + (b * b + cfg.r1 * cfg.r1 - cfg.r2 * cfg.r2).sqrt(), cfg.r1)
        };
        let p = [self.position[0] + chord * self.direction[0], self.position[1] + chord * self.direction[1]];
        self.position = scale(p, radius / norm(p));
        self.path_length += chord;
        self.elapsed_time = self.path_length / cfg.speed;
        let outer = radius == cfg.r1;
        self.on_outer = outer;
        if outer && escapes && cfg.in_hole(self.position) {
            return Event::Escape { time: self.elapsed_time };
        }
        let n = scale(self.position, 1.0 / radius);
        let dn = dot(self.direction, n);
        let d = [self.direction[0] - 2.0 * dn * n[0], self.direction[1] - 2.0 * dn * n[1]];
        self.direction = scale(d, 1.0 / norm(d));
        if outer || cfg.count_inner {
            self.reflections_since_switch += 1;
        }
        let mut switched = false;
        if outer {
            if let Some(k) = cfg.switch_after(self.class) {
                if self.reflections_since_switch >= k {
                    let target = self.class.other();
                    let theta = sample_angle(rng, Some(target), cfg.critical_angle());
                    *self = Self { reflections_since_switch: 0, ..Self::on_outer(self.position, theta, target) }
                        .with_clock(self);
                    switched = true;
                }
            }
            Event::Outer { chord, switched }
        } else {
            Event::Inner { chord }
        }
    }

    fn with_clock(mut self, old: &Self) -> Self {
        self.elapsed_time = old.elapsed_time;
        self.path_length = old.path_length;
        self
    }
}

/// Extremes of the chord lengths seen in a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChordStats {
    pub min_outer_inner: f64,
    pub max_outer_inner: f64,
    pub max_outer_outer: f64,
}

impl ChordStats {
    const EMPTY: ChordStats =
        ChordStats { min_outer_inner: f64::INFINITY, max_outer_inner: 0.0, max_outer_outer: 0.0 };

    fn merge(self, o: Self) -> Self {
        Self {
            min_outer_inner: self.min_outer_inner.min(o.min_outer_inner),
            max_outer_inner: self.max_outer_inner.max(o.max_outer_inner),
            max_outer_outer: self.max_outer_outer.max(o.max_outer_outer),
        }
    }
}

/// Outcome of one particle.
#[derive(Clone, Copy, Debug)]
struct Fate {
    escape: Option<(f64, MotionClass)>,
    chords: ChordStats,
}

fn run_particle(cfg: &BilliardConfig, index: u64) -> Fate {
    let mut rng = RngStream::new(cfg.seed, index).rng();
    let mut s = ParticleState::launch(cfg, &mut rng);
    let mut chords = ChordStats::EMPTY;
    let mut from_outer = true;
    loop {
        let ev = s.step(cfg, &mut rng, true);
        match ev {
            Event::Escape { time } => {
                let escape = (time < cfg.max_time).then_some((time, s.class));
                return Fate { escape, chords };
            }
            Event::Outer { chord, .. } => {
                if from_outer {
                    chords.max_outer_outer = chords.max_outer_outer.max(chord);
                }
                from_outer = true;
            }
            Event::Inner { chord } => {
                chords.min_outer_inner = chords.min_outer_inner.min(chord);
                chords.max_outer_inner = chords.max_outer_inner.max(chord);
                from_outer = false;
            }
        }
        if s.elapsed_time >= cfg.max_time {
            return Fate { escape: None, chords };
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActivityCurve {
    pub histogram: Histogram,
    pub escapes_state1: u64,
    pub escapes_state2: u64,
    pub n_particles: u64,
    pub chords: ChordStats,
}

impl ActivityCurve {
    pub fn escapes(&self) -> u64 {
        self.escapes_state1 + self.escapes_state2
    }

    /// Rows (bin_start, escapes, cumulative).
    pub fn to_table(&self) -> LabResult<DataTable> {
        let mut t = DataTable::new(["bin_start", "escapes", "cumulative"]);
        for (i, (c, cum)) in self.histogram.counts.iter().zip(self.histogram.cumulative()).enumerate() {
            t.push_row(vec![self.histogram.bin_start(i).into(), (*c).into(), cum.into()])?;
        }
        Ok(t.with_meta("particles", self.n_particles.to_string())
            .with_meta("escapes_state1", self.escapes_state1.to_string())
            .with_meta("escapes_state2", self.escapes_state2.to_string())
            .with_meta("chord_min_outer_inner", self.chords.min_outer_inner.to_string())
            .with_meta("chord_max_outer_inner", self.chords.max_outer_inner.to_string())
            .with_meta("chord_max_outer_outer", self.chords.max_outer_outer.to_string()))
    }
}

#[derive(Clone, Debug)]
struct Partial {
    counts: Vec<u64>,
    s1: u64,
    s2: u64,
    chords: ChordStats,
}

/// Simulates every particle independently, each on its own random stream,
/// and bins the escape times. The result does not depend on the number of
/// worker threads.
pub fn run_activity(cfg: &BilliardConfig) -> LabResult<ActivityCurve> {
    cfg.validate()?;
    let n_bins = (cfg.max_time / cfg.bin_width).ceil() as usize;
    let empty = || Partial { counts: vec![0; n_bins], s1: 0, s2: 0, chords: ChordStats::EMPTY };
    let total = (0..cfg.n_particles)
        .into_par_iter()
        .fold(empty, |mut acc, i| {
            let fate = run_particle(cfg, i);
            acc.chords = acc.chords.merge(fate.chords);
            if let Some((t, class)) = fate.escape {
                let bin = ((t / cfg.bin_width) as usize).min(n_bins - 1);
                acc.counts[bin] += 1;
                match class {
                    MotionClass::State1 => acc.s1 += 1,
                    MotionClass::State2 => acc.s2 += 1,
                }
            }
            acc
        })
        .reduce(empty, |mut a, b| {
            for (x, y) in a.counts.iter_mut().zip(&b.counts) {
                *x += y;
            }
            a.s1 += b.s1;
            a.s2 += b.s2;
            a.chords = a.chords.merge(b.chords);
            a
        });
    let mut histogram = Histogram::new(0.0, cfg.bin_width, n_bins)?;
    histogram.counts = total.counts;
    Ok(ActivityCurve {
        histogram,
        escapes_state1: total.s1,
        escapes_state2: total.s2,
        n_particles: cfg.n_particles,
        chords: total.chords,
    })
}

/// Follows particles for a fixed number of reflections with the hole closed
/// and counts outer reflections at which the geometric class differs from
/// the carried class. Without switching this is always zero.
pub fn class_violations(cfg: &BilliardConfig, particles: u64, reflections: u64) -> LabResult<u64> {
    cfg.validate()?;
    let v: Vec<LabResult<u64>> = (0..particles)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(cfg.seed, i).rng();
            let mut s = ParticleState::launch(cfg, &mut rng);
            let mut bad = 0;
            let mut done = 0;
            while done < reflections {
                match s.step(cfg, &mut rng, false) {
                    Event::Outer { .. } => {
                        if classify(s.position, s.direction, cfg.r2)? != s.class {
                            bad += 1;
                        }
                    }
                    Event::Inner { .. } => {}
                    Event::Escape { .. } => {
                        return Err(LabError::Numerical("escape with the hole closed".into()));
                    }
                }
                done += 1;
            }
            Ok(bad)
        })
        .collect();
    v.into_iter().sum()
}
