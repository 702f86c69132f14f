//! Compact regions `R ⊂ I×R^n`, their time slices, distances and projections.
//!
//! Points of the space-time are packed as `q = (t, x)` with `q[0] = t`.

mod pair;
mod shape;

pub(crate) use pair::{ball_point, sphere_point};
pub use pair::{
    AdmissiblePair, Construction, HhatInfo, PairError, PairEval, PairSummary, Provenance,
    TimeWeight, BUMP_SLOPE_BOUND, FD_RELATIVE_STEP,
};
pub use shape::ConvexPiece;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, Expression};
use crate::hypotheses::sampling::Halton;
use crate::vecops::{self, dist, join, norm};
use shape::Constraint;

/// Membership slack for closed-form shapes.
pub const CONTAIN_TOL: f64 = 1e-12;
const DYKSTRA_MAX_SWEEPS: usize = 20_000;
const DYKSTRA_TOL: f64 = 1e-13;
const SUBLEVEL_STARTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegionError {
    #[error("{what}: expected {expected} coordinates, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("box has lo > hi in coordinate {0}")]
    EmptyBox(usize),
    #[error("half-space normal is zero")]
    ZeroNormal,
    #[error("an intersection needs at least one piece")]
    NoPieces,
    #[error("the state projection of the region is unbounded; add a ball, tube or box")]
    Unbounded,
    #[error("operation needs a convex region")]
    NotConvex,
    #[error("sublevel bound must be positive, got {0}")]
    NonPositiveBound(f64),
    #[error("region function: {0}")]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Intersection of convex pieces.
    Convex(Vec<ConvexPiece>),
    /// `{(t, x) : h(t, x) ≤ 0, ||x|| ≤ bound}`.
    Sublevel { h: Expression, bound: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    a: f64,
    b: f64,
    n: usize,
    shape: Shape,
    /// Stored as the image of `shape` under `x ↦ -x`.
    mirrored: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SliceReport {
    pub t: f64,
    pub point: Option<Vec<f64>>,
}

impl Region {
    pub fn convex(a: f64, b: f64, n: usize, pieces: Vec<ConvexPiece>) -> Result<Self, RegionError> {
        if pieces.is_empty() {
            return Err(RegionError::NoPieces);
        }
        for piece in &pieces {
            piece.validate(n)?;
        }
        let region = Region {
            a,
            b,
            n,
            shape: Shape::Convex(pieces),
            mirrored: false,
        };
        if !region.state_bound().is_finite() {
            return Err(RegionError::Unbounded);
        }
        Ok(region)
    }

    pub fn ball(a: f64, b: f64, center: Vec<f64>, radius: f64) -> Result<Self, RegionError> {
        let n = center.len().saturating_sub(1);
        Self::convex(a, b, n, vec![ConvexPiece::Ball { center, radius }])
    }

    /// `I × B[center, radius]`.
    pub fn tube(a: f64, b: f64, center: Vec<f64>, radius: f64) -> Result<Self, RegionError> {
        let n = center.len();
        Self::convex(a, b, n, vec![ConvexPiece::Tube { center, radius }])
    }

    pub fn boxed(a: f64, b: f64, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, RegionError> {
        let n = lo.len().saturating_sub(1);
        Self::convex(a, b, n, vec![ConvexPiece::Box { lo, hi }])
    }

    pub fn sublevel(
        a: f64,
        b: f64,
        n: usize,
        h: Expression,
        bound: f64,
    ) -> Result<Self, RegionError> {
        if !(bound > 0.0) {
            return Err(RegionError::NonPositiveBound(bound));
        }
        if h.dim() != n {
            return Err(RegionError::Dimension {
                what: "sublevel function",
                expected: n,
                got: h.dim(),
            });
        }
        Ok(Region {
            a,
            b,
            n,
            shape: Shape::Sublevel { h, bound },
            mirrored: false,
        })
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn is_convex(&self) -> bool {
        matches!(self.shape, Shape::Convex(_))
    }

    pub fn is_mirrored(&self) -> bool {
        self.mirrored
    }

    /// The image of the region under `(t, x) ↦ (t, -x)`.
    pub fn mirrored(&self) -> Region {
        let mut out = self.clone();
        out.mirrored = !out.mirrored;
        out
    }

    fn inner(&self, q: &[f64]) -> Vec<f64> {
        if self.mirrored {
            let mut p = q.to_vec();
            p[1..].iter_mut().for_each(|v| *v = -*v);
            p
        } else {
            q.to_vec()
        }
    }

    fn outer(&self, p: Vec<f64>) -> Vec<f64> {
        self.inner(&p)
    }

    pub fn contains(&self, t: f64, x: &[f64]) -> bool {
        self.contains_point(&join(t, x))
    }

    pub fn contains_point(&self, q: &[f64]) -> bool {
        let span = CONTAIN_TOL * (1.0 + self.a.abs().max(self.b.abs()));
        if q[0] < self.a - span || q[0] > self.b + span {
            return false;
        }
        let q = self.inner(q);
        match &self.shape {
            Shape::Convex(pieces) => pieces
                .iter()
                .all(|p| p.violation(&q) <= CONTAIN_TOL * (1.0 + norm(&q))),
            Shape::Sublevel { h, bound } => {
                norm(&q[1..]) <= *bound && h.eval(q[0], &q[1..]).map(|v| v <= 0.0).unwrap_or(false)
            }
        }
    }

    /// Nearest point of a convex region.
    pub fn project(&self, q: &[f64]) -> Result<Vec<f64>, RegionError> {
        match &self.shape {
            Shape::Convex(pieces) => {
                Ok(self.outer(project_pieces(pieces, self.a, self.b, &self.inner(q))))
            }
            Shape::Sublevel { .. } => Err(RegionError::NotConvex),
        }
    }

    /// Nearest point found. Exact for convex regions; for sublevel regions the
    /// best feasible point over deterministic multistarts, so the distance to
    /// it is an upper bound on the true distance.
    pub fn nearest_point(&self, q: &[f64]) -> Vec<f64> {
        match &self.shape {
            Shape::Convex(pieces) => {
                self.outer(project_pieces(pieces, self.a, self.b, &self.inner(q)))
            }
            Shape::Sublevel { .. } => {
                if self.contains_point(q) {
                    return q.to_vec();
                }
                self.sublevel_nearest(q).unwrap_or_else(|| q.to_vec())
            }
        }
    }

    pub fn distance(&self, q: &[f64]) -> f64 {
        if self.contains_point(q) {
            return 0.0;
        }
        match &self.shape {
            Shape::Convex(_) => dist(q, &self.nearest_point(q)),
            Shape::Sublevel { .. } => match self.sublevel_nearest(q) {
                Some(p) => dist(q, &p),
                None => f64::INFINITY,
            },
        }
    }

    /// Upper bound on `max{||x|| : x ∈ π₂(R)}` (exact for a single ball, tube or box).
    pub fn state_bound(&self) -> f64 {
        match &self.shape {
            Shape::Convex(pieces) => pieces
                .iter()
                .map(|p| p.state_bound(self.a, self.b))
                .fold(f64::INFINITY, f64::min),
            Shape::Sublevel { bound, .. } => *bound,
        }
    }

    /// A member of the slice `R_t`, if one is found.
    pub fn slice_point(&self, t: f64) -> Option<Vec<f64>> {
        if t < self.a || t > self.b {
            return None;
        }
        let x = match &self.shape {
            Shape::Convex(pieces) => {
                let guess = join(t, &pieces[0].state_center(self.n));
                let mut constraints: Vec<Constraint> =
                    pieces.iter().map(Constraint::Piece).collect();
                constraints.push(Constraint::TimeFix(t));
                let p = dykstra(&constraints, &guess);
                let ok = pieces.iter().all(|piece| piece.violation(&p) <= 1e-9);
                if !ok {
                    return None;
                }
                p[1..].to_vec()
            }
            Shape::Sublevel { h, bound } => self.sublevel_slice_search(h, *bound, t, 0.0)?,
        };
        Some(self.outer(join(t, &x))[1..].to_vec())
    }

    /// A point of `R_t` whose distance to the slice boundary is at least `margin`.
    pub fn slice_interior_point(&self, t: f64, margin: f64) -> Option<Vec<f64>> {
        if t < self.a || t > self.b {
            return None;
        }
        let x = match &self.shape {
            Shape::Convex(pieces) => {
                let start = self.inner(&join(t, &self.slice_point(t)?))[1..].to_vec();
                let (x, depth) = maximize_slice_depth(pieces, t, start);
                if depth < margin {
                    return None;
                }
                x
            }
            Shape::Sublevel { h, bound } => self.sublevel_slice_search(h, *bound, t, margin)?,
        };
        Some(self.outer(join(t, &x))[1..].to_vec())
    }

    /// Distance from `(t, x)` to the boundary of `R` relative to `I×R^n`,
    /// positive inside and non-positive outside. Linearised for sublevel regions.
    pub fn boundary_depth(&self, t: f64, x: &[f64]) -> f64 {
        let q = self.inner(&join(t, x));
        match &self.shape {
            Shape::Convex(pieces) => pieces
                .iter()
                .map(|p| p.depth(&q, self.a, self.b))
                .fold(f64::INFINITY, f64::min),
            Shape::Sublevel { bound, .. } => {
                if !self.contains_point(&q) {
                    return -self.distance(&self.outer(q));
                }
                self.sublevel_ray_depth(&q).min(bound - norm(&q[1..]))
            }
        }
    }

    /// For `q` outside the region: a boundary point and the unit direction
    /// pointing away from the region there.
    pub fn boundary_hit(&self, q: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.contains_point(q) {
            return None;
        }
        match &self.shape {
            Shape::Convex(_) => {
                let p = self.nearest_point(q);
                let d = vecops::sub(q, &p);
                let len = norm(&d);
                (len > 0.0).then(|| (p, vecops::scale(&d, 1.0 / len)))
            }
            Shape::Sublevel { .. } => {
                let t = q[0].clamp(self.a, self.b);
                let anchor = join(t, &self.slice_point(t)?);
                let (mut inside, mut outside) = (anchor.clone(), q.to_vec());
                for _ in 0..60 {
                    let mid = vecops::scale(&vecops::add(&inside, &outside), 0.5);
                    if self.contains_point(&mid) {
                        inside = mid;
                    } else {
                        outside = mid;
                    }
                }
                let d = vecops::sub(q, &anchor);
                let len = norm(&d);
                (len > 0.0).then(|| (inside, vecops::scale(&d, 1.0 / len)))
            }
        }
    }

    /// Shortest exit distance along deterministic rays from an inner point;
    /// rays leaving the slab `[a, b]` first do not count.
    fn sublevel_ray_depth(&self, q: &[f64]) -> f64 {
        let bound = match &self.shape {
            Shape::Sublevel { bound, .. } => *bound,
            Shape::Convex(_) => unreachable!("sublevel helper on a convex region"),
        };
        let inside = |p: &[f64]| self.sublevel_value(p) <= 0.0;
        let dim = q.len();
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for i in 0..dim {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; dim];
                e[i] = s;
                dirs.push(e);
            }
        }
        let mut halton = Halton::new(dim, 13);
        for _ in 0..24 {
            dirs.push(pair::sphere_point(&halton.next_point()));
        }
        let mut best = f64::INFINITY;
        for d in &dirs {
            let at = |s: f64| -> Vec<f64> { q.iter().zip(d).map(|(a, b)| a + s * b).collect() };
            let (mut lo, mut hi) = (0.0, 1e-3);
            let mut exited = false;
            while hi <= 4.0 * bound + 1.0 {
                let p = at(hi);
                if p[0] < self.a || p[0] > self.b {
                    break;
                }
                if !inside(&p) {
                    exited = true;
                    break;
                }
                lo = hi;
                hi *= 2.0;
            }
            if !exited {
                continue;
            }
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if inside(&at(mid)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            best = best.min(lo);
        }
        best
    }

    fn sublevel_value(&self, q: &[f64]) -> f64 {
        match &self.shape {
            Shape::Sublevel { h, bound } => {
                let over = norm(&q[1..]) - bound;
                let v = h.eval(q[0], &q[1..]).unwrap_or(f64::INFINITY);
                if over > 0.0 {
                    v.max(0.0) + over
                } else {
                    v
                }
            }
            Shape::Convex(_) => unreachable!("sublevel helper on a convex region"),
        }
    }

    /// Pulls `y` (inner coordinates) onto `{h ≤ 0}` by Newton steps on `h`,
    /// keeping `t ∈ I` and `||x|| ≤ bound`.
    fn sublevel_feasible(&self, mut y: Vec<f64>, bound: f64) -> Option<Vec<f64>> {
        for _ in 0..60 {
            let v = self.sublevel_value(&y);
            if v <= 0.0 {
                return Some(y);
            }
            let g = fd_gradient(|p| self.sublevel_value(p), &y);
            let g2 = vecops::dot(&g, &g);
            if !(g2 > 0.0) || !g2.is_finite() {
                return None;
            }
            // overshoot slightly so the iterate lands inside
            let step = 1.05 * v / g2;
            for (yi, gi) in y.iter_mut().zip(&g) {
                *yi -= step * gi;
            }
            y[0] = y[0].clamp(self.a, self.b);
            let nx = norm(&y[1..]);
            if nx > bound {
                y[1..].iter_mut().for_each(|v| *v *= bound / nx);
            }
        }
        None
    }

    fn sublevel_nearest(&self, q_outer: &[f64]) -> Option<Vec<f64>> {
        let bound = match &self.shape {
            Shape::Sublevel { bound, .. } => *bound,
            Shape::Convex(_) => return Some(self.nearest_point(q_outer)),
        };
        let q = self.inner(q_outer);
        let mut halton = Halton::new(self.n + 1, 1);
        let mut best: Option<(f64, Vec<f64>)> = None;
        for k in 0..SUBLEVEL_STARTS {
            let start = if k == 0 {
                q.clone()
            } else {
                let u = halton.next_point();
                let mut s = vec![self.a + (self.b - self.a) * u[0]];
                s.extend(u[1..].iter().map(|v| bound * (2.0 * v - 1.0)));
                s
            };
            let Some(mut y) = self.sublevel_feasible(start, bound) else {
                continue;
            };
            let mut alpha = 0.5;
            for _ in 0..80 {
                let trial: Vec<f64> = y
                    .iter()
                    .zip(&q)
                    .map(|(yi, qi)| yi + alpha * (qi - yi))
                    .collect();
                match self.sublevel_feasible(trial, bound) {
                    Some(z) if dist(&z, &q) < dist(&y, &q) => y = z,
                    _ => alpha *= 0.5,
                }
                if alpha < 1e-8 {
                    break;
                }
            }
            let d = dist(&y, &q);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, y));
            }
        }
        best.map(|(_, y)| self.outer(y))
    }

    fn sublevel_slice_search(
        &self,
        h: &Expression,
        bound: f64,
        t: f64,
        margin: f64,
    ) -> Option<Vec<f64>> {
        let mut halton = Halton::new(self.n, 7);
        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..400 {
            let u = halton.next_point();
            let x: Vec<f64> = u.iter().map(|v| bound * (2.0 * v - 1.0)).collect();
            if norm(&x) > bound - margin {
                continue;
            }
            if let Ok(v) = h.eval(t, &x) {
                if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                    best = Some((v, x));
                }
            }
        }
        let (mut value, mut x) = best?;
        // descend on h within the slice
        for _ in 0..100 {
            if value < -margin.max(0.0) || (margin == 0.0 && value <= 0.0) {
                break;
            }
            let g = fd_gradient(|p| h.eval(t, p).unwrap_or(f64::NAN), &x);
            let g2 = vecops::dot(&g, &g);
            if !(g2 > 0.0) {
                break;
            }
            let step = (value + 2.0 * margin + 1e-12) / g2;
            let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
            match h.eval(t, &trial) {
                Ok(v) if v < value && norm(&trial) <= bound - margin => {
                    value = v;
                    x = trial;
                }
                _ => break,
            }
        }
        let ok = if margin > 0.0 {
            value <= -margin
        } else {
            value <= 0.0
        };
        ok.then_some(x)
    }
}

/// Central finite-difference gradient with step `1e-6 (1 + |q_i|)`.
pub fn fd_gradient(mut f: impl FnMut(&[f64]) -> f64, q: &[f64]) -> Vec<f64> {
    let mut p = q.to_vec();
    (0..q.len())
        .map(|i| {
            let step = FD_RELATIVE_STEP * (1.0 + q[i].abs());
            p[i] = q[i] + step;
            let up = f(&p);
            p[i] = q[i] - step;
            let down = f(&p);
            p[i] = q[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

fn project_pieces(pieces: &[ConvexPiece], a: f64, b: f64, q: &[f64]) -> Vec<f64> {
    if let [piece] = pieces {
        if let Some(p) = piece.project_with_slab(q, a, b) {
            return p;
        }
        let p = piece.project(q);
        if p[0] >= a && p[0] <= b {
            return p;
        }
    }
    let mut constraints: Vec<Constraint> = pieces.iter().map(Constraint::Piece).collect();
    constraints.push(Constraint::Slab(a, b));
    dykstra(&constraints, q)
}

/// Dykstra's alternating projection onto an intersection of convex sets.
fn dykstra(constraints: &[Constraint], q: &[f64]) -> Vec<f64> {
    let mut x = q.to_vec();
    let mut increments = vec![vec![0.0; q.len()]; constraints.len()];
    for _ in 0..DYKSTRA_MAX_SWEEPS {
        let mut change: f64 = 0.0;
        for (c, inc) in constraints.iter().zip(increments.iter_mut()) {
            let y = vecops::add(&x, inc);
            let p = c.project(&y);
            *inc = vecops::sub(&y, &p);
            change = change.max(dist(&p, &x));
            x = p;
        }
        if change <= DYKSTRA_TOL * (1.0 + norm(&x)) {
            break;
        }
    }
    x
}

fn maximize_slice_depth(pieces: &[ConvexPiece], t: f64, start: Vec<f64>) -> (Vec<f64>, f64) {
    let depth = |x: &[f64]| {
        pieces
            .iter()
            .map(|p| p.slice_depth(t, x))
            .fold(f64::INFINITY, f64::min)
    };
    let scale = pieces
        .iter()
        .map(|p| p.slice_scale(t))
        .fold(1.0_f64, f64::max);
    let mut best_x = start.clone();
    let mut best = depth(&start);
    let mut x = start;
    let mut step = 0.25 * scale;
    for _ in 0..600 {
        let active = pieces
            .iter()
            .min_by(|p, q| p.slice_depth(t, &x).total_cmp(&q.slice_depth(t, &x)))
            .expect("non-empty");
        let g = active.slice_depth_gradient(t, &x);
        let gn = norm(&g);
        if gn == 0.0 {
            break;
        }
        x.iter_mut()
            .zip(&g)
            .for_each(|(xi, gi)| *xi += step * gi / gn);
        let d = depth(&x);
        if d > best {
            best = d;
            best_x = x.clone();
        }
        step *= 0.985;
    }
    (best_x, best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_distance_and_projection() {
        let r = Region::ball(-5.0, 5.0, vec![0.0, 0.0, 0.0], 2.0).unwrap();
        assert!((r.distance(&[0.0, 3.0, 0.0]) - 1.0).abs() < 1e-15);
        assert_eq!(r.distance(&[0.0, 1.0, 0.5]), 0.0);
        assert_eq!(r.project(&[3.0, 0.0, 0.0]).unwrap(), vec![2.0, 0.0, 0.0]);
        assert_eq!(r.project(&[0.5, 0.5, 0.0]).unwrap(), vec![0.5, 0.5, 0.0]);
        assert_eq!(r.state_bound(), 2.0);
    }

    #[test]
    fn box_corner_distance() {
        let r = Region::boxed(0.0, 1.0, vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]).unwrap();
        // (t, x) = (1, 2, 2): corner (1, 1, 1) at distance √2
        assert!((r.distance(&[1.0, 2.0, 2.0]) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ball_slab_intersection_uses_dykstra() {
        // center outside the slab in time: the ball projection leaves I
        let r = Region::ball(0.0, 1.0, vec![-1.0, 0.0], 1.5).unwrap();
        let q = [0.5, 3.0];
        let p = r.project(&q).unwrap();
        assert!(p[0] >= -1e-12 && p[0] <= 1.0 + 1e-12);
        assert!(r.contains_point(&p) || r.distance(&p) < 1e-9);
        // brute force over the slab-clipped ball boundary
        let mut best = f64::INFINITY;
        for i in 0..=2000 {
            let t = i as f64 / 2000.0;
            let rad2 = 1.5f64 * 1.5 - (t + 1.0) * (t + 1.0);
            if rad2 < 0.0 {
                continue;
            }
            for x in [rad2.sqrt(), -rad2.sqrt()] {
                best = best.min(dist(&q, &[t, x]));
            }
        }
        assert!((dist(&q, &p) - best).abs() < 1e-5);
    }

    #[test]
    fn slices() {
        let r = Region::ball(0.0, 1.0, vec![0.0, 0.0, 0.0], 2.0).unwrap();
        for t in [0.0, 0.5, 1.0] {
            let x = r.slice_point(t).unwrap();
            assert!(r.contains(t, &x));
            assert!(r.slice_interior_point(t, 1e-6).is_some());
        }
        let flat = Region::boxed(0.0, 1.0, vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
        assert!(flat.slice_point(0.5).is_some());
        assert!(flat.slice_interior_point(0.5, 1e-6).is_none());
        let small = Region::ball(0.0, 1.0, vec![0.0, 0.0], 0.5).unwrap();
        assert!(small.slice_point(1.0).is_none());
    }

    #[test]
    fn sublevel_region() {
        let h = Expression::parse("x1^2 + x2^2 - 1", 2).unwrap();
        let r = Region::sublevel(0.0, 1.0, 2, h, 3.0).unwrap();
        assert!(r.contains(0.5, &[0.5, 0.5]));
        assert!(!r.contains(0.5, &[1.5, 0.0]));
        let d = r.distance(&[0.5, 2.0, 0.0]);
        assert!((1.0 - 1e-9..1.0 + 1e-3).contains(&d), "{d}");
        assert!(r.slice_interior_point(0.3, 1e-6).is_some());
        assert!((r.boundary_depth(0.0, &[0.5, 0.0]) - 0.5).abs() < 1e-9);
        assert!((r.boundary_depth(0.0, &[0.0, 0.0]) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mirrored_region() {
        let r = Region::ball(0.0, 1.0, vec![0.0, 1.0], 0.5).unwrap();
        let m = r.mirrored();
        assert!(m.contains(0.0, &[-1.0]));
        assert!(!m.contains(0.0, &[1.0]));
        assert_eq!(m.project(&[0.0, -3.0]).unwrap(), vec![0.0, -1.5]);
    }
}
