//! Hexagonal cell lattice: ring numbering, cube coordinates, centroids,
//! adjacency and point location.
//!
//! Cells are numbered in concentric rings. Index 0 is the center; ring `r`
//! starts at `1 + 3r(r-1)` with the cell directly above the center and runs
//! clockwise. Neighbor direction `k` points at `90° - 60°·k`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::LatticeError;
use crate::geometry::Vec2;

/// Cube offsets of the six neighbor directions, clockwise from straight up.
pub const DIRECTIONS: [CubeCoord; 6] = [
    CubeCoord::new(0, 1, -1),
    CubeCoord::new(1, 0, -1),
    CubeCoord::new(1, -1, 0),
    CubeCoord::new(0, -1, 1),
    CubeCoord::new(-1, 0, 1),
    CubeCoord::new(-1, 1, 0),
];

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// Heading (radians, counter-clockwise from +x) of neighbor direction `k`.
pub fn direction_heading(k: usize) -> f64 {
    (90.0 - 60.0 * (k % 6) as f64).to_radians()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CubeCoord {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl CubeCoord {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    pub fn ring(self) -> u32 {
        self.x.unsigned_abs().max(self.y.unsigned_abs()).max(self.z.unsigned_abs())
    }

    pub fn distance(self, other: CubeCoord) -> u32 {
        let d = self - other;
        (d.x.unsigned_abs() + d.y.unsigned_abs() + d.z.unsigned_abs()) / 2
    }

    pub fn scale(self, k: i32) -> Self {
        Self::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn neighbor(self, k: usize) -> Self {
        self + DIRECTIONS[k % 6]
    }
}

impl std::ops::Add for CubeCoord {
    type Output = CubeCoord;
    fn add(self, o: CubeCoord) -> CubeCoord {
        CubeCoord::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for CubeCoord {
    type Output = CubeCoord;
    fn sub(self, o: CubeCoord) -> CubeCoord {
        CubeCoord::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(pub u32);

impl CellId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirspaceConfig {
    pub radius_rings: u32,
    pub centroid_spacing_m: f64,
}

impl Default for AirspaceConfig {
    fn default() -> Self {
        Self { radius_rings: 2, centroid_spacing_m: 4000.0 }
    }
}

impl AirspaceConfig {
    pub fn cell_count(&self) -> usize {
        let r = self.radius_rings as usize;
        1 + 3 * r * (r + 1)
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        if self.radius_rings == 0 {
            return Err(LatticeError::InvalidConfig("radius_rings must be positive".into()));
        }
        if !(self.centroid_spacing_m > 0.0) || !self.centroid_spacing_m.is_finite() {
            return Err(LatticeError::InvalidConfig("centroid_spacing_m must be positive".into()));
        }
        Ok(())
    }
}

/// First index of ring `r`.
pub fn ring_start(r: u32) -> u32 {
    if r == 0 {
        0
    } else {
        1 + 3 * r * (r - 1)
    }
}

// Works for any index, including virtual cells beyond the configured radius.
fn index_to_cube(index: u32) -> CubeCoord {
    if index == 0 {
        return CubeCoord::new(0, 0, 0);
    }
    // ring r holds indices [1+3r(r-1), 1+3r(r+1))
    let mut r = 1;
    while ring_start(r + 1) <= index {
        r += 1;
    }
    let offset = index - ring_start(r);
    let side = (offset / r) as usize;
    let step = (offset % r) as i32;
    DIRECTIONS[side].scale(r as i32) + DIRECTIONS[(side + 2) % 6].scale(step)
}

fn cube_to_index(c: CubeCoord) -> u32 {
    let r = c.ring();
    if r == 0 {
        return 0;
    }
    for side in 0..6 {
        let rest = c - DIRECTIONS[side].scale(r as i32);
        let along = DIRECTIONS[(side + 2) % 6];
        for step in 0..r as i32 {
            if along.scale(step) == rest {
                return ring_start(r) + side as u32 * r + step as u32;
            }
        }
    }
    unreachable!("cube {c:?} has no ring position")
}

pub fn cell_to_cube(id: CellId, cfg: &AirspaceConfig) -> Result<CubeCoord, LatticeError> {
    if id.index() >= cfg.cell_count() {
        return Err(LatticeError::OutOfRange { index: id.0, count: cfg.cell_count() });
    }
    Ok(index_to_cube(id.0))
}

pub fn cube_to_cell(c: CubeCoord, cfg: &AirspaceConfig) -> Result<CellId, LatticeError> {
    if c.x + c.y + c.z != 0 {
        return Err(LatticeError::NotACube(c));
    }
    if c.ring() > cfg.radius_rings {
        return Err(LatticeError::OutsideAirspace(c));
    }
    Ok(CellId(cube_to_index(c)))
}

fn cube_centroid(c: CubeCoord, spacing: f64) -> Vec2 {
    Vec2::new(SQRT3_2 * spacing * c.x as f64, spacing * (c.y - c.z) as f64 / 2.0)
}

/// Centroid of `id`. Indices beyond the airspace map to virtual cells of the
/// infinite lattice.
pub fn centroid(id: CellId, cfg: &AirspaceConfig) -> Vec2 {
    cube_centroid(index_to_cube(id.0), cfg.centroid_spacing_m)
}

pub fn neighbors(id: CellId, cfg: &AirspaceConfig) -> Vec<CellId> {
    let c = index_to_cube(id.0);
    let mut out: Vec<CellId> = (0..6)
        .map(|k| c.neighbor(k))
        .filter(|n| n.ring() <= cfg.radius_rings)
        .map(|n| CellId(cube_to_index(n)))
        .collect();
    out.sort_unstable();
    out
}

pub fn hex_distance(a: CellId, b: CellId) -> u32 {
    index_to_cube(a.0).distance(index_to_cube(b.0))
}

/// Neighbor direction `k` such that `b` is the `k`-th neighbor of `a`.
pub fn direction_between(a: CellId, b: CellId) -> Option<usize> {
    let d = index_to_cube(b.0) - index_to_cube(a.0);
    DIRECTIONS.iter().position(|&k| k == d)
}

fn cube_round(fx: f64, fy: f64, fz: f64) -> CubeCoord {
    let (mut rx, mut ry, mut rz) = (fx.round(), fy.round(), fz.round());
    let (dx, dy, dz) = ((rx - fx).abs(), (ry - fy).abs(), (rz - fz).abs());
    if dx > dy && dx > dz {
        rx = -ry - rz;
    } else if dy > dz {
        ry = -rx - rz;
    } else {
        rz = -rx - ry;
    }
    CubeCoord::new(rx as i32, ry as i32, rz as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Location {
    Cell(CellId),
    Outside,
}

impl Location {
    pub fn cell(self) -> Option<CellId> {
        match self {
            Location::Cell(c) => Some(c),
            Location::Outside => None,
        }
    }
}

/// Nearest-centroid cell of `p`. Equidistant points go to the lower index,
/// counting the virtual ring just outside the airspace, so a point on the
/// outer border still belongs to the airspace.
pub fn locate(p: Vec2, cfg: &AirspaceConfig) -> Location {
    let d = cfg.centroid_spacing_m;
    let fx = p.x / (SQRT3_2 * d);
    let fy = p.y / d - fx / 2.0;
    let guess = cube_round(fx, fy, -fx - fy);
    if guess.ring() > cfg.radius_rings + 1 {
        return Location::Outside;
    }
    let mut best: Option<(f64, u32)> = None;
    for cand in std::iter::once(guess).chain((0..6).map(|k| guess.neighbor(k))) {
        let dist = cube_centroid(cand, d).distance(p);
        let idx = cube_to_index(cand);
        best = match best {
            None => Some((dist, idx)),
            Some((bd, bi)) => {
                if dist < bd - 1e-6 || ((dist - bd).abs() <= 1e-6 && idx < bi) {
                    Some((dist, idx))
                } else {
                    Some((bd, bi))
                }
            }
        };
    }
    let (_, idx) = best.expect("candidates are never empty");
    if (idx as usize) < cfg.cell_count() {
        Location::Cell(CellId(idx))
    } else {
        Location::Outside
    }
}

/// Precomputed tables for one airspace; cheap lookups for the hot loops.
#[derive(Debug, Clone)]
pub struct Airspace {
    cfg: AirspaceConfig,
    centroids: Vec<Vec2>,
    neighbors: Vec<Vec<CellId>>,
    distance: Vec<u32>,
}

impl Airspace {
    pub fn new(cfg: AirspaceConfig) -> Self {
        let n = cfg.cell_count();
        let ids: Vec<CellId> = (0..n as u32).map(CellId).collect();
        let centroids = ids.iter().map(|&c| centroid(c, &cfg)).collect();
        let nbrs = ids.iter().map(|&c| neighbors(c, &cfg)).collect();
        let mut distance = vec![0; n * n];
        for &a in &ids {
            for &b in &ids {
                distance[a.index() * n + b.index()] = hex_distance(a, b);
            }
        }
        Self { cfg, centroids, neighbors: nbrs, distance }
    }

    pub fn config(&self) -> &AirspaceConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = CellId> {
        (0..self.len() as u32).map(CellId)
    }

    pub fn contains(&self, c: CellId) -> bool {
        c.index() < self.len()
    }

    pub fn centroid(&self, c: CellId) -> Vec2 {
        self.centroids[c.index()]
    }

    pub fn neighbors(&self, c: CellId) -> &[CellId] {
        &self.neighbors[c.index()]
    }

    pub fn distance(&self, a: CellId, b: CellId) -> u32 {
        self.distance[a.index() * self.len() + b.index()]
    }

    pub fn ring(&self, c: CellId) -> u32 {
        index_to_cube(c.0).ring()
    }

    pub fn outer_ring(&self) -> Vec<CellId> {
        let r = self.cfg.radius_rings;
        (ring_start(r)..ring_start(r + 1)).map(CellId).collect()
    }

    pub fn locate(&self, p: Vec2) -> Location {
        locate(p, &self.cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    fn cfg() -> AirspaceConfig {
        AirspaceConfig::default()
    }

    // Plain breadth-first search over the neighbor graph.
    fn bfs(from: CellId, cfg: &AirspaceConfig) -> Vec<u32> {
        let mut dist = vec![u32::MAX; cfg.cell_count()];
        dist[from.index()] = 0;
        let mut q = VecDeque::from([from]);
        while let Some(c) = q.pop_front() {
            for n in neighbors(c, cfg) {
                if dist[n.index()] == u32::MAX {
                    dist[n.index()] = dist[c.index()] + 1;
                    q.push_back(n);
                }
            }
        }
        dist
    }

    #[test]
    fn default_has_19_cells_and_ring_sizes() {
        let cfg = cfg();
        assert_eq!(cfg.cell_count(), 19);
        let mut per_ring = [0; 3];
        for i in 0..19 {
            per_ring[cell_to_cube(CellId(i), &cfg).unwrap().ring() as usize] += 1;
        }
        assert_eq!(per_ring, [1, 6, 12]);
        assert_eq!(ring_start(2), 7);
        assert_eq!(cell_to_cube(CellId(7), &cfg).unwrap().ring(), 2);
        assert_eq!(cell_to_cube(CellId(6), &cfg).unwrap().ring(), 1);
    }

    #[test]
    fn round_trip_and_cube_sum() {
        let cfg = AirspaceConfig { radius_rings: 5, ..cfg() };
        for i in 0..cfg.cell_count() as u32 {
            let c = cell_to_cube(CellId(i), &cfg).unwrap();
            assert_eq!(c.x + c.y + c.z, 0);
            assert_eq!(cube_to_cell(c, &cfg).unwrap(), CellId(i));
        }
        assert!(cell_to_cube(CellId(91), &cfg).is_err());
    }

    #[test]
    fn centroid_orientation() {
        let cfg = cfg();
        assert_eq!(centroid(CellId(0), &cfg), Vec2::ZERO);
        let up = centroid(CellId(1), &cfg);
        assert!(up.x.abs() < 1e-9 && (up.y - 4000.0).abs() < 1e-9);
        // clockwise numbering: cell 2 sits at 30 degrees
        let c2 = centroid(CellId(2), &cfg);
        assert!((c2.angle().to_degrees() - 30.0).abs() < 1e-9);
        for a in 0..19 {
            for b in neighbors(CellId(a), &cfg) {
                let d = centroid(CellId(a), &cfg).distance(centroid(b, &cfg));
                assert!((d - 4000.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn neighbor_counts_and_symmetry() {
        let cfg = cfg();
        assert_eq!(neighbors(CellId(0), &cfg).len(), 6);
        let mut counts = Vec::new();
        for i in 7..19 {
            counts.push(neighbors(CellId(i), &cfg).len());
        }
        assert_eq!(counts.iter().filter(|&&n| n == 3).count(), 6);
        assert_eq!(counts.iter().filter(|&&n| n == 4).count(), 6);
        // corners sit at even offsets of ring 2
        assert_eq!(neighbors(CellId(7), &cfg).len(), 3);
        assert_eq!(neighbors(CellId(8), &cfg).len(), 4);
        for a in 0..19 {
            for b in neighbors(CellId(a), &cfg) {
                assert!(neighbors(b, &cfg).contains(&CellId(a)));
            }
        }
    }

    #[test]
    fn distance_matches_bfs() {
        let cfg = cfg();
        for a in 0..19 {
            let d = bfs(CellId(a), &cfg);
            for b in 0..19 {
                assert_eq!(hex_distance(CellId(a), CellId(b)), d[b as usize]);
            }
        }
        // opposite corners
        assert_eq!(hex_distance(CellId(7), CellId(13)), 4);
    }

    #[test]
    fn locate_centroids_and_far_points() {
        let cfg = cfg();
        for i in 0..19 {
            assert_eq!(locate(centroid(CellId(i), &cfg), &cfg), Location::Cell(CellId(i)));
        }
        assert_eq!(locate(Vec2::new(50_000.0, 0.0), &cfg), Location::Outside);
        assert_eq!(locate(Vec2::new(0.0, -50_000.0), &cfg), Location::Outside);
    }

    #[test]
    fn locate_midpoint_tie_goes_to_lower_index() {
        let cfg = cfg();
        for a in 0..19u32 {
            for b in neighbors(CellId(a), &cfg) {
                let pa = centroid(CellId(a), &cfg);
                let pb = centroid(b, &cfg);
                let mid = (pa + pb) * 0.5;
                assert!((mid.distance(pa) - mid.distance(pb)).abs() < 1e-9);
                assert_eq!(locate(mid, &cfg), Location::Cell(CellId(a).min(b)));
            }
        }
    }

    #[test]
    fn outer_border_midpoints_stay_inside() {
        let cfg = cfg();
        let corner = centroid(CellId(7), &cfg);
        let beyond = corner * 1.5;
        let mid = (corner + beyond) * 0.5;
        assert_eq!(locate(mid, &cfg), Location::Cell(CellId(7)));
        assert_eq!(locate(mid * 1.001, &cfg), Location::Outside);
    }

    #[test]
    fn direction_lookup() {
        assert_eq!(direction_between(CellId(0), CellId(1)), Some(0));
        assert_eq!(direction_between(CellId(0), CellId(4)), Some(3));
        assert_eq!(direction_between(CellId(0), CellId(7)), None);
        assert!((direction_heading(1).to_degrees() - 30.0).abs() < 1e-12);
    }
}
