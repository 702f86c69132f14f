use serde::{Deserialize, Serialize};

use super::RegionError;
use crate::vecops::{dist, dot, norm, project_ball};

/// One closed convex set in `(t, x)` space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexPiece {
    /// Euclidean ball in `R^{n+1}`.
    Ball { center: Vec<f64>, radius: f64 },
    /// `R × B[center, radius]`, a ball in the state variables only.
    Tube { center: Vec<f64>, radius: f64 },
    /// Axis-aligned box in `R^{n+1}`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `{q : <normal, q> ≤ offset}`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
}

impl ConvexPiece {
    pub(super) fn validate(&self, n: usize) -> Result<(), RegionError> {
        let check = |what, v: &Vec<f64>, expected| {
            if v.len() != expected {
                Err(RegionError::Dimension {
                    what,
                    expected,
                    got: v.len(),
                })
            } else {
                Ok(())
            }
        };
        match self {
            ConvexPiece::Ball { center, radius } => {
                check("ball center", center, n + 1)?;
                if !(*radius > 0.0) {
                    return Err(RegionError::NonPositiveRadius(*radius));
                }
            }
            ConvexPiece::Tube { center, radius } => {
                check("tube center", center, n)?;
                if !(*radius > 0.0) {
                    return Err(RegionError::NonPositiveRadius(*radius));
                }
            }
            ConvexPiece::Box { lo, hi } => {
                check("box lo", lo, n + 1)?;
                check("box hi", hi, n + 1)?;
                if let Some(i) = (0..=n).find(|&i| !(lo[i] <= hi[i])) {
                    return Err(RegionError::EmptyBox(i));
                }
            }
            ConvexPiece::HalfSpace { normal, .. } => {
                check("half-space normal", normal, n + 1)?;
                if norm(normal) == 0.0 {
                    return Err(RegionError::ZeroNormal);
                }
            }
        }
        Ok(())
    }

    /// Signed excess; `≤ 0` inside.
    pub(super) fn violation(&self, q: &[f64]) -> f64 {
        match self {
            ConvexPiece::Ball { center, radius } => dist(q, center) - radius,
            ConvexPiece::Tube { center, radius } => dist(&q[1..], center) - radius,
            ConvexPiece::Box { lo, hi } => q
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| (l - v).max(v - h))
                .fold(f64::NEG_INFINITY, f64::max),
            ConvexPiece::HalfSpace { normal, offset } => (dot(normal, q) - offset) / norm(normal),
        }
    }

    pub(super) fn project(&self, q: &[f64]) -> Vec<f64> {
        match self {
            ConvexPiece::Ball { center, radius } => project_ball(center, *radius, q),
            ConvexPiece::Tube { center, radius } => {
                let mut p = vec![q[0]];
                p.extend(project_ball(center, *radius, &q[1..]));
                p
            }
            ConvexPiece::Box { lo, hi } => q
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| v.clamp(*l, *h))
                .collect(),
            ConvexPiece::HalfSpace { normal, offset } => {
                let excess = dot(normal, q) - offset;
                if excess <= 0.0 {
                    return q.to_vec();
                }
                let s = excess / dot(normal, normal);
                q.iter().zip(normal).map(|(v, c)| v - s * c).collect()
            }
        }
    }

    /// Exact projection onto `piece ∩ ([a, b] × R^n)` where it separates by coordinates.
    pub(super) fn project_with_slab(&self, q: &[f64], a: f64, b: f64) -> Option<Vec<f64>> {
        match self {
            ConvexPiece::Tube { .. } => {
                let mut p = self.project(q);
                p[0] = p[0].clamp(a, b);
                Some(p)
            }
            ConvexPiece::Box { lo, hi } if lo[0].max(a) <= hi[0].min(b) => {
                let mut p = self.project(q);
                p[0] = q[0].clamp(lo[0].max(a), hi[0].min(b));
                Some(p)
            }
            _ => None,
        }
    }

    /// Largest `||x||` over the piece inside the slab `[a, b]`.
    pub(super) fn state_bound(&self, a: f64, b: f64) -> f64 {
        match self {
            ConvexPiece::Ball { center, radius } => {
                let tc = center[0].clamp(a, b);
                let r2 = radius * radius - (tc - center[0]).powi(2);
                if r2 < 0.0 {
                    0.0
                } else {
                    norm(&center[1..]) + r2.sqrt()
                }
            }
            ConvexPiece::Tube { center, radius } => norm(center) + radius,
            ConvexPiece::Box { lo, hi } => lo[1..]
                .iter()
                .zip(&hi[1..])
                .map(|(l, h)| l.abs().max(h.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
            ConvexPiece::HalfSpace { .. } => f64::INFINITY,
        }
    }

    pub(super) fn state_center(&self, n: usize) -> Vec<f64> {
        match self {
            ConvexPiece::Ball { center, .. } => center[1..].to_vec(),
            ConvexPiece::Tube { center, .. } => center.clone(),
            ConvexPiece::Box { lo, hi } => lo[1..]
                .iter()
                .zip(&hi[1..])
                .map(|(l, h)| 0.5 * (l + h))
                .collect(),
            ConvexPiece::HalfSpace { .. } => vec![0.0; n],
        }
    }

    /// Distance to the piece boundary relative to `[a, b] × R^n`; positive inside.
    pub(super) fn depth(&self, q: &[f64], a: f64, b: f64) -> f64 {
        match self {
            ConvexPiece::Ball { .. } | ConvexPiece::Tube { .. } | ConvexPiece::HalfSpace { .. } => {
                -self.violation(q)
            }
            ConvexPiece::Box { lo, hi } => {
                let mut d = q[1..]
                    .iter()
                    .zip(lo[1..].iter().zip(&hi[1..]))
                    .map(|(v, (l, h))| (v - l).min(h - v))
                    .fold(f64::INFINITY, f64::min);
                if lo[0] > a {
                    d = d.min(q[0] - lo[0]);
                }
                if hi[0] < b {
                    d = d.min(hi[0] - q[0]);
                }
                d
            }
        }
    }

    /// Depth of `x` inside the time slice at `t`.
    pub(super) fn slice_depth(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            ConvexPiece::Ball { center, radius } => {
                let r2 = radius * radius - (t - center[0]).powi(2);
                if r2 < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    r2.sqrt() - dist(x, &center[1..])
                }
            }
            ConvexPiece::Tube { center, radius } => radius - dist(x, center),
            ConvexPiece::Box { lo, hi } => {
                if t < lo[0] || t > hi[0] {
                    return f64::NEG_INFINITY;
                }
                x.iter()
                    .zip(lo[1..].iter().zip(&hi[1..]))
                    .map(|(v, (l, h))| (v - l).min(h - v))
                    .fold(f64::INFINITY, f64::min)
            }
            ConvexPiece::HalfSpace { normal, offset } => {
                let nx = norm(&normal[1..]);
                let slack = offset - normal[0] * t - dot(&normal[1..], x);
                if nx > 0.0 {
                    slack / nx
                } else if slack >= 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Ascent direction for [`Self::slice_depth`].
    pub(super) fn slice_depth_gradient(&self, _t: f64, x: &[f64]) -> Vec<f64> {
        let toward = |c: &[f64]| {
            let d: Vec<f64> = c.iter().zip(x).map(|(c, v)| c - v).collect();
            let len = norm(&d);
            if len > 0.0 {
                d.iter().map(|v| v / len).collect()
            } else {
                vec![0.0; x.len()]
            }
        };
        match self {
            ConvexPiece::Ball { center, .. } => toward(&center[1..]),
            ConvexPiece::Tube { center, .. } => toward(center),
            ConvexPiece::Box { lo, hi } => {
                let mut g = vec![0.0; x.len()];
                let mut worst = f64::INFINITY;
                let mut pick = (0, 0.0);
                for (i, v) in x.iter().enumerate() {
                    let (dl, dh) = (v - lo[i + 1], hi[i + 1] - v);
                    if dl < worst {
                        worst = dl;
                        pick = (i, 1.0);
                    }
                    if dh < worst {
                        worst = dh;
                        pick = (i, -1.0);
                    }
                }
                if !x.is_empty() && lo[pick.0 + 1] < hi[pick.0 + 1] {
                    g[pick.0] = pick.1;
                }
                g
            }
            ConvexPiece::HalfSpace { normal, .. } => {
                let nx = norm(&normal[1..]);
                if nx > 0.0 {
                    normal[1..].iter().map(|v| -v / nx).collect()
                } else {
                    vec![0.0; x.len()]
                }
            }
        }
    }

    pub(super) fn slice_scale(&self, _t: f64) -> f64 {
        match self {
            ConvexPiece::Ball { radius, .. } | ConvexPiece::Tube { radius, .. } => *radius,
            ConvexPiece::Box { lo, hi } => lo[1..]
                .iter()
                .zip(&hi[1..])
                .map(|(l, h)| h - l)
                .fold(0.0, f64::max),
            ConvexPiece::HalfSpace { .. } => 1.0,
        }
    }
}

/// Sets visited by Dykstra's method.
pub(super) enum Constraint<'a> {
    Piece(&'a ConvexPiece),
    Slab(f64, f64),
    TimeFix(f64),
}

impl Constraint<'_> {
    pub(super) fn project(&self, q: &[f64]) -> Vec<f64> {
        match self {
            Constraint::Piece(piece) => piece.project(q),
            Constraint::Slab(a, b) => {
                let mut p = q.to_vec();
                p[0] = p[0].clamp(*a, *b);
                p
            }
            Constraint::TimeFix(t) => {
                let mut p = q.to_vec();
                p[0] = *t;
                p
            }
        }
    }
}
