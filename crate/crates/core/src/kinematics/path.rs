use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, Vec2};

/// One piece of a flyable path, relative to the pose it starts from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Segment {
    Line { len: f64 },
    /// Constant-radius turn; positive sweep turns left (counter-clockwise).
    Arc { radius: f64, sweep: f64 },
}

impl Segment {
    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { len } => len,
            Segment::Arc { radius, sweep } => radius * sweep.abs(),
        }
    }

    /// Pose after flying `u` meters of this segment from `from`.
    pub fn advance(&self, from: Pose, u: f64) -> Pose {
        match *self {
            Segment::Line { .. } => straight(from, u),
            Segment::Arc { radius, sweep } => {
                if sweep == 0.0 || radius == 0.0 {
                    return from;
                }
                let sense = sweep.signum();
                let turned = sense * u / radius;
                let center = from.pos + Vec2::from_heading(from.heading).perp() * (sense * radius);
                let h = from.heading + turned;
                Pose::new(center - Vec2::from_heading(h).perp() * (sense * radius), h)
            }
        }
    }

    pub fn end(&self, from: Pose) -> Pose {
        self.advance(from, self.length())
    }

    pub fn turn(&self) -> f64 {
        match *self {
            Segment::Line { .. } => 0.0,
            Segment::Arc { sweep, .. } => sweep,
        }
    }
}

/// A path: a start pose followed by relative segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Leg {
    start: Pose,
    segments: Vec<Segment>,
    marks: Vec<(Pose, f64)>,
    finish: Pose,
    length: f64,
}

fn straight(from: Pose, u: f64) -> Pose {
    Pose::new(from.pos + Vec2::from_heading(from.heading) * u, from.heading)
}

impl Leg {
    pub fn new(start: Pose, segments: Vec<Segment>) -> Self {
        let segments: Vec<Segment> = segments.into_iter().filter(|s| s.length() > 0.0).collect();
        let mut marks = Vec::with_capacity(segments.len());
        let mut pose = start;
        let mut acc = 0.0;
        for s in &segments {
            marks.push((pose, acc));
            pose = s.end(pose);
            acc += s.length();
        }
        Self { start, segments, marks, finish: pose, length: acc }
    }

    pub fn start(&self) -> Pose {
        self.start
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn end(&self) -> Pose {
        self.finish
    }

    /// Net heading change, radians.
    pub fn total_turn(&self) -> f64 {
        self.segments.iter().map(Segment::turn).sum()
    }

    /// Pose after `s` meters. Past the end the path continues straight.
    pub fn pose_at(&self, s: f64) -> Pose {
        let s = s.max(0.0);
        if s >= self.length {
            return straight(self.finish, s - self.length);
        }
        let i = self.marks.partition_point(|&(_, acc)| acc <= s) - 1;
        let (pose, acc) = self.marks[i];
        self.segments[i].advance(pose, s - acc)
    }

    /// Points every `step` meters including both ends.
    pub fn sample(&self, step: f64) -> Vec<Vec2> {
        let n = (self.length / step).ceil().max(1.0) as usize;
        (0..=n).map(|i| self.pose_at(self.length * i as f64 / n as f64).pos).collect()
    }

    /// Re-expresses a leg built in a local frame: rotate by `rot` and
    /// translate by `origin`.
    pub fn transformed(&self, origin: Vec2, rot: f64) -> Leg {
        let start = Pose::new(origin + self.start.pos.rotate(rot), self.start.heading + rot);
        Leg::new(start, self.segments.clone())
    }

    pub fn mirrored(&self) -> Leg {
        let start = Pose::new(Vec2::new(self.start.pos.x, -self.start.pos.y), -self.start.heading);
        let segments = self
            .segments
            .iter()
            .map(|s| match *s {
                Segment::Arc { radius, sweep } => Segment::Arc { radius, sweep: -sweep },
                line => line,
            })
            .collect();
        Leg::new(start, segments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn left_and_right_quarter_arcs() {
        let p = Pose::new(Vec2::ZERO, 0.0);
        let l = Segment::Arc { radius: 100.0, sweep: FRAC_PI_2 }.end(p);
        assert!((l.pos.x - 100.0).abs() < 1e-9 && (l.pos.y - 100.0).abs() < 1e-9);
        assert!((l.heading - FRAC_PI_2).abs() < 1e-12);
        let r = Segment::Arc { radius: 100.0, sweep: -FRAC_PI_2 }.end(p);
        assert!((r.pos.x - 100.0).abs() < 1e-9 && (r.pos.y + 100.0).abs() < 1e-9);
    }

    #[test]
    fn pose_at_walks_segments() {
        let leg = Leg::new(
            Pose::new(Vec2::ZERO, 0.0),
            vec![Segment::Line { len: 100.0 }, Segment::Arc { radius: 50.0, sweep: PI }],
        );
        assert!((leg.length() - (100.0 + 50.0 * PI)).abs() < 1e-9);
        let mid = leg.pose_at(50.0);
        assert!((mid.pos.x - 50.0).abs() < 1e-12);
        let end = leg.end();
        assert!((end.pos.x - 100.0).abs() < 1e-9 && (end.pos.y - 100.0).abs() < 1e-9);
        let past = leg.pose_at(leg.length() + 10.0);
        assert!((past.pos.x - 90.0).abs() < 1e-9);
    }

    #[test]
    fn mirror_flips_turns() {
        let leg = Leg::new(Pose::new(Vec2::ZERO, 0.0), vec![Segment::Arc { radius: 10.0, sweep: 1.0 }]);
        let m = leg.mirrored();
        assert!((m.end().pos.y + leg.end().pos.y).abs() < 1e-12);
        assert!((m.total_turn() + 1.0).abs() < 1e-12);
    }
}
