//! Precomputed in-cell paths.
//!
//! Every path that crosses a cell has length equal to the centroid spacing,
//! so each cell is occupied for exactly one cell time at constant speed.
//! Paths are solved once in a local frame (cell centroid at the origin,
//! entry heading along +x) and rotated into place.
//!
//! Transit legs run from the entry border midpoint to the exit border
//! midpoint. Turning legs bulge symmetrically about the bisector of the
//! turn: a short counter-turn, a straight, the main turn near the centroid,
//! then the mirror image. Holding legs circle left on a loop whose
//! circumference is one spacing and end at a fixed decision pose, from which
//! an exit connector of the same length reaches any border.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_3, PI, TAU};
use std::sync::{Arc, Mutex, OnceLock};

use super::path::{Leg, Segment};
use super::KinematicLimits;
use crate::error::GuidanceError;
use crate::geometry::{wrap_pi, Pose, Vec2};

/// Local exit heading for relative exit direction `m` (lattice steps
/// clockwise from straight ahead). A reversal is flown as a left turn.
pub fn relative_exit_angle(m: usize) -> f64 {
    match m % 6 {
        0 => 0.0,
        1 => -FRAC_PI_3,
        2 => -2.0 * FRAC_PI_3,
        3 => PI,
        4 => 2.0 * FRAC_PI_3,
        _ => FRAC_PI_3,
    }
}

/// Smallest distance from `p` to the six borders of a cell centered at the
/// origin with edge normals at multiples of 60°, skipping edges in `skip`.
/// Negative when `p` lies outside.
fn border_margin(p: Vec2, half: f64, skip: &[usize]) -> f64 {
    (0..6)
        .filter(|j| !skip.contains(j))
        .map(|j| half - p.dot(Vec2::from_heading(j as f64 * FRAC_PI_3)))
        .fold(f64::INFINITY, f64::min)
}

fn contained(leg: &Leg, half: f64) -> bool {
    leg.sample(10.0).iter().all(|&p| border_margin(p, half, &[]) >= -1e-6)
}

fn normal_index(angle: f64) -> usize {
    ((angle / FRAC_PI_3).round() as i64).rem_euclid(6) as usize
}

#[derive(Debug)]
pub struct LegBook {
    spacing: f64,
    loop_radius: f64,
    transit: [Leg; 6],
    hold_entry: Leg,
    hold_loop: Leg,
    hold_exit: [Leg; 6],
    origin_hold: Leg,
}

impl LegBook {
    pub fn build(limits: &KinematicLimits, spacing: f64) -> Result<Self, GuidanceError> {
        let r = limits.turn_radius();
        let half = spacing / 2.0;
        let rho = spacing / TAU;
        if rho < r {
            return Err(GuidanceError::Infeasible { turn_deg: 360.0 });
        }
        let m_in = Pose::new(Vec2::new(-half, 0.0), 0.0);
        let q = Pose::new(Vec2::new(0.0, 2.0 * rho), PI);

        let mut transit = Vec::with_capacity(6);
        for m in 0..6 {
            let theta = relative_exit_angle(m);
            let leg = if m == 0 {
                Leg::new(m_in, vec![Segment::Line { len: spacing }])
            } else {
                let left = solve_turn(theta.abs(), r, spacing)
                    .ok_or(GuidanceError::Infeasible { turn_deg: theta.to_degrees() })?;
                if theta > 0.0 {
                    left
                } else {
                    left.mirrored()
                }
            };
            transit.push(leg);
        }

        let hold_entry =
            Leg::new(m_in, vec![Segment::Line { len: half }, Segment::Arc { radius: rho, sweep: PI }]);
        let hold_loop = Leg::new(q, vec![Segment::Arc { radius: rho, sweep: TAU }]);
        let origin_hold =
            Leg::new(Pose::new(Vec2::ZERO, 0.0), vec![Segment::Arc { radius: rho, sweep: PI }]);
        if !contained(&hold_entry, half) {
            return Err(GuidanceError::Infeasible { turn_deg: 180.0 });
        }

        let mut hold_exit = Vec::with_capacity(6);
        for m in 0..6 {
            let a = relative_exit_angle(m);
            let target = Pose::new(Vec2::from_heading(a) * half, a);
            let segs = connector(q, target, spacing, r, half)
                .ok_or(GuidanceError::Infeasible { turn_deg: a.to_degrees() })?;
            hold_exit.push(Leg::new(q, segs));
        }

        Ok(Self {
            spacing,
            loop_radius: rho,
            transit: transit.try_into().expect("six legs"),
            hold_entry,
            hold_loop,
            hold_exit: hold_exit.try_into().expect("six legs"),
            origin_hold,
        })
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn loop_radius(&self) -> f64 {
        self.loop_radius
    }

    /// Local-frame transit leg for relative exit direction `m`.
    pub fn local_transit(&self, m: usize) -> &Leg {
        &self.transit[m % 6]
    }

    pub fn local_hold_entry(&self) -> &Leg {
        &self.hold_entry
    }

    pub fn local_hold_loop(&self) -> &Leg {
        &self.hold_loop
    }

    pub fn local_hold_exit(&self, m: usize) -> &Leg {
        &self.hold_exit[m % 6]
    }

    pub fn local_origin_hold(&self) -> &Leg {
        &self.origin_hold
    }

    /// From the centroid straight out to the border along `heading`.
    pub fn departure(&self, centroid: Vec2, heading: f64) -> Leg {
        Leg::new(Pose::new(centroid, heading), vec![Segment::Line { len: self.spacing / 2.0 }])
    }

    /// From the entry border midpoint straight to the centroid.
    pub fn arrival(&self, centroid: Vec2, heading: f64) -> Leg {
        let start = centroid - Vec2::from_heading(heading) * (self.spacing / 2.0);
        Leg::new(Pose::new(start, heading), vec![Segment::Line { len: self.spacing / 2.0 }])
    }

    pub fn transit(&self, centroid: Vec2, heading: f64, m: usize) -> Leg {
        self.local_transit(m).transformed(centroid, heading)
    }

    pub fn hold_entry(&self, centroid: Vec2, heading: f64) -> Leg {
        self.hold_entry.transformed(centroid, heading)
    }

    pub fn hold_loop(&self, centroid: Vec2, heading: f64) -> Leg {
        self.hold_loop.transformed(centroid, heading)
    }

    pub fn hold_exit(&self, centroid: Vec2, heading: f64, m: usize) -> Leg {
        self.local_hold_exit(m).transformed(centroid, heading)
    }

    pub fn origin_hold(&self, centroid: Vec2, heading: f64) -> Leg {
        self.origin_hold.transformed(centroid, heading)
    }
}

type BookKey = (u64, u64, u64);
type BookCache = Mutex<HashMap<BookKey, Result<Arc<LegBook>, GuidanceError>>>;

/// Shared, lazily built leg book for one set of limits and spacing.
pub fn leg_book(limits: &KinematicLimits, spacing: f64) -> Result<Arc<LegBook>, GuidanceError> {
    static BOOKS: OnceLock<BookCache> = OnceLock::new();
    let key = (limits.speed_mps.to_bits(), limits.turn_rate_radps.to_bits(), spacing.to_bits());
    let books = BOOKS.get_or_init(Default::default);
    if let Some(b) = books.lock().expect("leg cache poisoned").get(&key) {
        return b.clone();
    }
    // Built outside the lock; a racing duplicate build is harmless.
    let built = LegBook::build(limits, spacing).map(Arc::new);
    books.lock().expect("leg cache poisoned").entry(key).or_insert(built).clone()
}

// Second half of a left turn by `theta`, in a frame whose exit direction is
// +x. The apex sits `e` meters from the centroid along the inner bisector.
// Returns (length error of the half, inner straight, outer straight).
fn half_turn(theta: f64, e: f64, alpha: f64, r: f64, spacing: f64) -> Option<(f64, f64, f64)> {
    if alpha.sin().abs() < 1e-9 {
        return None;
    }
    let t = theta / 2.0;
    let apex = Pose::new(Vec2::new(-e * t.sin(), -e * t.cos()), -t);
    let p1 = Segment::Arc { radius: r, sweep: t + alpha }.end(apex);
    let q = Segment::Arc { radius: r, sweep: -alpha }.end(Pose::new(Vec2::ZERO, alpha));
    let s2 = -(p1.pos.y + q.pos.y) / alpha.sin();
    let x3 = p1.pos.x + s2 * alpha.cos() + q.pos.x;
    let s1 = spacing / 2.0 - x3;
    let len = r * (t + alpha).abs() + s2 + r * alpha.abs() + s1;
    Some((len - spacing / 2.0, s2, s1))
}

fn turn_leg(theta: f64, alpha: f64, s1: f64, s2: f64, r: f64, spacing: f64) -> Leg {
    let t = theta / 2.0;
    Leg::new(
        Pose::new(Vec2::new(-spacing / 2.0, 0.0), 0.0),
        vec![
            Segment::Line { len: s1 },
            Segment::Arc { radius: r, sweep: -alpha },
            Segment::Line { len: s2 },
            Segment::Arc { radius: r, sweep: 2.0 * (t + alpha) },
            Segment::Line { len: s2 },
            Segment::Arc { radius: r, sweep: -alpha },
            Segment::Line { len: s1 },
        ],
    )
}

/// Left turn by `theta` in (0, pi] whose path length is exactly `spacing`,
/// with the apex as close to the centroid as the geometry allows.
fn solve_turn(theta: f64, r: f64, spacing: f64) -> Option<Leg> {
    let half = spacing / 2.0;
    let exit = Vec2::from_heading(theta) * half;
    let valid = |e: f64, a: f64| {
        half_turn(theta, e, a, r, spacing).filter(|&(_, s2, s1)| s2 >= 0.0 && s1 >= 0.0)
    };
    for i in 0..=(half as i64) {
        let offsets: &[f64] = if i == 0 { &[0.0] } else { &[-(i as f64), i as f64] };
        for &e in offsets {
            let mut roots = Vec::new();
            let mut prev: Option<(f64, f64)> = None;
            for k in -899..=899 {
                let a = (k as f64 * 0.1).to_radians();
                let cur = valid(e, a).map(|(res, _, _)| (a, res));
                if let (Some((a0, r0)), Some((a1, r1))) = (prev, cur) {
                    if r0 == 0.0 || r0.signum() != r1.signum() {
                        let (mut lo, mut hi, mut rlo) = (a0, a1, r0);
                        for _ in 0..80 {
                            let mid = 0.5 * (lo + hi);
                            let Some((rm, _, _)) = half_turn(theta, e, mid, r, spacing) else {
                                break;
                            };
                            if rm.signum() == rlo.signum() && rm != 0.0 {
                                lo = mid;
                                rlo = rm;
                            } else {
                                hi = mid;
                            }
                        }
                        roots.push(0.5 * (lo + hi));
                    }
                }
                prev = cur;
            }
            roots.sort_by(|a: &f64, b: &f64| a.abs().total_cmp(&b.abs()));
            for a in roots {
                let Some((res, s2, s1)) = valid(e, a) else { continue };
                if res.abs() > 1e-6 {
                    continue;
                }
                let leg = turn_leg(theta, a, s1, s2, r, spacing);
                if leg.end().pos.distance(exit) < 1e-6
                    && wrap_pi(leg.end().heading - theta).abs() < 1e-9
                    && contained(&leg, half)
                {
                    return Some(leg);
                }
            }
        }
    }
    None
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(m);
    if d.abs() < 1e-9 {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][c] = b[row];
        }
        *o = det(mc) / d;
    }
    Some(out)
}

// Straight and arc segments alternating, starting and ending with a straight.
fn alternate(straights: &[f64], arcs: &[f64], r: f64) -> Vec<Segment> {
    let mut segs = Vec::with_capacity(straights.len() + arcs.len());
    for (i, &s) in straights.iter().enumerate() {
        segs.push(Segment::Line { len: s.max(0.0) });
        if let Some(&a) = arcs.get(i) {
            segs.push(Segment::Arc { radius: r, sweep: a });
        }
    }
    segs
}

/// Straight/arc/straight/... path of total length `len` from `start` to
/// `end`, inside the cell, keeping as far as possible from every border
/// except the one `end` sits on.
fn connector(start: Pose, end: Pose, len: f64, r: f64, half: f64) -> Option<Vec<Segment>> {
    let exit_edge = normal_index(end.pos.angle());
    let grid: Vec<f64> = (-72..=72).map(|i| (i as f64 * 5.0).to_radians()).collect();
    let base = wrap_pi(end.heading - start.heading);
    for n_arcs in [2usize, 3] {
        // (clearance bucket, total turn, segments)
        let mut best: Option<(i64, f64, Vec<Segment>)> = None;
        for wraps in [-1.0, 0.0, 1.0] {
            let total = base + TAU * wraps;
            let free_arcs: Vec<Vec<f64>> = if n_arcs == 2 {
                grid.iter().map(|&a| vec![a]).collect()
            } else {
                grid.iter().flat_map(|&a| grid.iter().map(move |&b| vec![a, b])).collect()
            };
            for free in free_arcs {
                let last = total - free.iter().sum::<f64>();
                let mut arcs = free.clone();
                arcs.push(last);
                let turning: f64 = arcs.iter().map(|a| a.abs()).sum();
                if turning > 3.0 * PI {
                    continue;
                }
                let straight_len = len - r * turning;
                if straight_len < 0.0 {
                    continue;
                }
                let mut headings = vec![start.heading];
                let mut disp = Vec2::ZERO;
                let mut h = start.heading;
                for &a in &arcs {
                    disp += Segment::Arc { radius: r, sweep: a }.end(Pose::new(Vec2::ZERO, h)).pos;
                    h += a;
                    headings.push(h);
                }
                let w = end.pos - start.pos - disp;
                let zeros: Vec<Option<usize>> =
                    if n_arcs == 2 { vec![None] } else { (0..4).map(Some).collect() };
                for zero in zeros {
                    let cols: Vec<usize> = (0..headings.len()).filter(|&i| Some(i) != zero).collect();
                    let mut m = [[0.0; 3]; 3];
                    for (j, &c) in cols.iter().enumerate() {
                        m[0][j] = headings[c].cos();
                        m[1][j] = headings[c].sin();
                        m[2][j] = 1.0;
                    }
                    let Some(sol) = solve3(m, [w.x, w.y, straight_len]) else { continue };
                    if sol.iter().any(|&s| s < -1e-9) {
                        continue;
                    }
                    let mut straights = vec![0.0; headings.len()];
                    for (j, &c) in cols.iter().enumerate() {
                        straights[c] = sol[j];
                    }
                    let segs = alternate(&straights, &arcs, r);
                    let leg = Leg::new(start, segs.clone());
                    if leg.end().pos.distance(end.pos) > 1e-6 || (leg.length() - len).abs() > 1e-6 {
                        continue;
                    }
                    let pts = leg.sample(10.0);
                    if pts.iter().any(|&p| border_margin(p, half, &[]) < -1e-6) {
                        continue;
                    }
                    let clearance = pts
                        .iter()
                        .map(|&p| border_margin(p, half, &[exit_edge]))
                        .fold(f64::INFINITY, f64::min);
                    let bucket = (clearance / 25.0).floor() as i64;
                    let better = match &best {
                        None => true,
                        Some((b, t, _)) => bucket > *b || (bucket == *b && turning < *t - 1e-9),
                    };
                    if better {
                        best = Some((bucket, turning, segs));
                    }
                }
            }
        }
        if let Some((_, _, segs)) = best {
            return Some(segs);
        }
    }
    None
}
