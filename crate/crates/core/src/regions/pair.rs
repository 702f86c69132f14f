//! Admissible pairs `(h, p)` attached to a region.

use serde::Serialize;
use thiserror::Error;

use super::{fd_gradient, Region, RegionError};
use crate::expr::{EvalError, Expression};
use crate::hypotheses::sampling::Halton;
use crate::vecops::{join, norm};

/// Relative step of the central differences used for user-supplied functions.
pub const FD_RELATIVE_STEP: f64 = 1e-6;
/// Bound used for `max |bump'|` when sizing the ĥ perturbation.
pub const BUMP_SLOPE_BOUND: f64 = 16.0 / (3.0 * 1.732_050_807_568_877_2);

const BLEND_SAMPLES: usize = 4000;
const USER_H1_SAMPLES: usize = 2000;
const H1_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PairError {
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error("pair function: {0}")]
    Eval(#[from] EvalError),
    #[error("{what}: expected {expected} components, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("slice R_t is empty at t = {0}")]
    EmptySlice(f64),
    #[error("h disagrees with the region at (t, x) = {point:?}: h = {h:e}")]
    H1Violation { point: Vec<f64>, h: f64 },
    #[error("time weight must be positive, got {value} at t = {t}")]
    NonPositiveWeight { t: f64, value: f64 },
    #[error("summed pairs must share region and p")]
    NotShared,
    #[error("invalid ĥ request: {0}")]
    InvalidHhat(String),
}

/// Everything the solver and the checks need at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEval {
    pub h: f64,
    pub dh_dt: f64,
    pub grad_x: Vec<f64>,
    pub p1: f64,
    pub p2: Vec<f64>,
}

/// Scalar weight `β(t) > 0` used to rescale `h`.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeWeight {
    Constant(f64),
    /// `1 + eta (1 - ((t - t0)/delta)^2)^2` on `|t - t0| < delta`, `1` elsewhere.
    Bump {
        t0: f64,
        delta: f64,
        eta: f64,
    },
    Expr(Expression),
}

impl TimeWeight {
    pub fn value(&self, t: f64) -> Result<f64, EvalError> {
        Ok(match self {
            TimeWeight::Constant(c) => *c,
            TimeWeight::Bump { t0, delta, eta } => {
                let s = (t - t0) / delta;
                if s.abs() < 1.0 {
                    1.0 + eta * (1.0 - s * s).powi(2)
                } else {
                    1.0
                }
            }
            TimeWeight::Expr(e) => e.eval(t, &[])?,
        })
    }

    pub fn derivative(&self, t: f64) -> Result<f64, EvalError> {
        Ok(match self {
            TimeWeight::Constant(_) => 0.0,
            TimeWeight::Bump { t0, delta, eta } => {
                let s = (t - t0) / delta;
                if s.abs() < 1.0 {
                    -4.0 * eta * s * (1.0 - s * s) / delta
                } else {
                    0.0
                }
            }
            TimeWeight::Expr(e) => {
                let step = FD_RELATIVE_STEP * (1.0 + t.abs());
                (e.eval(t + step, &[])? - e.eval(t - step, &[])?) / (2.0 * step)
            }
        })
    }
}

/// Scratch data of the blended construction: `C = B[0, r]`, `D = B(0, r+1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Construction {
    pub r: f64,
}

/// `σ(s) = 1 - s²(3 - 2s)` clamped to `[0, 1]`.
fn smoothstep(s: f64) -> (f64, f64) {
    if s <= 0.0 {
        (1.0, 0.0)
    } else if s >= 1.0 {
        (0.0, 0.0)
    } else {
        (1.0 - s * s * (3.0 - 2.0 * s), -6.0 * s * (1.0 - s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Constructed,
    HalfSquaredDistance,
    User,
    Rescaled,
    Sum,
    Mirrored,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Constructed(Construction),
    HalfSquaredDistance,
    User {
        h: Expression,
        p: Option<Vec<Expression>>,
        cap_radius: f64,
    },
    Scaled {
        inner: Box<AdmissiblePair>,
        beta: TimeWeight,
    },
    Sum(Box<AdmissiblePair>, Box<AdmissiblePair>),
    Mirrored(Box<AdmissiblePair>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissiblePair {
    region: Region,
    kind: Kind,
    p2_bound: f64,
    k_work: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairSummary {
    pub provenance: Provenance,
    pub state_bound_m: f64,
    pub p2_bound: f64,
    pub working_radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub construction: Option<Construction>,
    pub closed_form_gradients: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HhatInfo {
    pub t0: f64,
    pub delta: f64,
    pub eta: f64,
    pub h_sup: f64,
    /// `max |β'|` on a fine grid.
    pub beta_prime_sup: f64,
}

impl AdmissiblePair {
    /// The blended pair: `φ = ½ d_R² σ(d_C)` on `C`, a blend with `½ d_C²` on
    /// `D \ C`, `½ d_C²` outside `D`; `p = (t, x - ∇ₓh)`.
    pub fn construct(region: &Region) -> Result<Self, PairError> {
        check_slices(region)?;
        let m = region.state_bound();
        let r = m;
        let mut pair = AdmissiblePair {
            region: region.clone(),
            kind: Kind::Constructed(Construction { r }),
            p2_bound: m.max(r),
            k_work: r + 3.0,
        };
        // p₂ = P_R on C and P_C outside D; the blend shell is sampled.
        let (a, b) = region.interval();
        let n = region.dim();
        let mut halton = Halton::new(n + 2, 3);
        let mut sup: f64 = 0.0;
        for _ in 0..BLEND_SAMPLES {
            let u = halton.next_point();
            let t = a + (b - a) * u[0];
            let radius = r + u[1];
            let x: Vec<f64> = sphere_point(&u[2..]).iter().map(|d| d * radius).collect();
            if let Ok(e) = pair.eval(t, &x) {
                sup = sup.max(norm(&e.p2));
            }
        }
        pair.p2_bound = pair.p2_bound.max(1.05 * sup);
        Ok(pair)
    }

    /// `h = ½ d_R²` on `R^{n+1}` with `p = P_R`.
    pub fn half_squared_distance(region: &Region) -> Result<Self, PairError> {
        check_slices(region)?;
        let m = region.state_bound();
        Ok(AdmissiblePair {
            region: region.clone(),
            kind: Kind::HalfSquaredDistance,
            p2_bound: m,
            k_work: m + 3.0,
        })
    }

    /// Wraps a user `h` (and optionally `p`, given as `n` state components or
    /// `n + 1` components with the time component first). Gradients are
    /// central differences. Without `p`, `p₂ = x - ∇ₓh` inside `D` and `P_C(x)`
    /// outside.
    pub fn from_user(
        region: &Region,
        h: Expression,
        p: Option<Vec<Expression>>,
    ) -> Result<Self, PairError> {
        Self::user_pair(region, h, p, true)
    }

    /// [`Self::from_user`] without the build-time sign test, so that a
    /// mismatched `h` can still be handed to the checks and reported.
    pub fn from_user_unchecked(
        region: &Region,
        h: Expression,
        p: Option<Vec<Expression>>,
    ) -> Result<Self, PairError> {
        Self::user_pair(region, h, p, false)
    }

    fn user_pair(
        region: &Region,
        h: Expression,
        p: Option<Vec<Expression>>,
        strict: bool,
    ) -> Result<Self, PairError> {
        let n = region.dim();
        if h.dim() != n {
            return Err(PairError::Dimension {
                what: "h",
                expected: n,
                got: h.dim(),
            });
        }
        if let Some(p) = &p {
            if p.len() != n && p.len() != n + 1 {
                return Err(PairError::Dimension {
                    what: "p",
                    expected: n + 1,
                    got: p.len(),
                });
            }
        }
        check_slices(region)?;
        let m = region.state_bound();
        let mut pair = AdmissiblePair {
            region: region.clone(),
            kind: Kind::User {
                h,
                p,
                cap_radius: m + 1.0,
            },
            p2_bound: m,
            k_work: m + 3.0,
        };
        let (a, b) = region.interval();
        let mut halton = Halton::new(n + 1, 5);
        let mut sup: f64 = 0.0;
        for k in 0..USER_H1_SAMPLES {
            let u = halton.next_point();
            let t = a + (b - a) * u[0];
            let x: Vec<f64> = if k % 2 == 0 {
                match region.slice_point(t) {
                    Some(anchor) => anchor
                        .iter()
                        .zip(&u[1..])
                        .map(|(c, v)| c + 0.5 * m * (2.0 * v - 1.0))
                        .collect(),
                    None => return Err(PairError::EmptySlice(t)),
                }
            } else {
                u[1..]
                    .iter()
                    .map(|v| pair.k_work * (2.0 * v - 1.0))
                    .collect()
            };
            let e = pair.eval(t, &x)?;
            let q = join(t, &x);
            let inside = region.contains_point(&q);
            let bad = if inside {
                e.h > H1_TOL
            } else {
                e.h <= 0.0 && region.distance(&q) > H1_TOL
            };
            if bad && strict {
                return Err(PairError::H1Violation { point: q, h: e.h });
            }
            sup = sup.max(norm(&e.p2));
        }
        pair.p2_bound = pair.p2_bound.max(1.05 * sup);
        Ok(pair)
    }

    /// `(β h, p)`; `β` must be positive on a fine grid of `I`.
    pub fn rescaled(&self, beta: TimeWeight) -> Result<Self, PairError> {
        let (a, b) = self.region.interval();
        for j in 0..=2000 {
            let t = a + (b - a) * j as f64 / 2000.0;
            let value = beta.value(t)?;
            if !(value > 0.0) {
                return Err(PairError::NonPositiveWeight { t, value });
            }
        }
        Ok(AdmissiblePair {
            region: self.region.clone(),
            kind: Kind::Scaled {
                inner: Box::new(self.clone()),
                beta,
            },
            p2_bound: self.p2_bound,
            k_work: self.k_work,
        })
    }

    /// `(h₁ + h₂, p)`; both pairs must live on the same region and share `p`.
    pub fn sum(&self, other: &AdmissiblePair) -> Result<Self, PairError> {
        if self.region != other.region || self.p_signature() != other.p_signature() {
            return Err(PairError::NotShared);
        }
        Ok(AdmissiblePair {
            region: self.region.clone(),
            kind: Kind::Sum(Box::new(self.clone()), Box::new(other.clone())),
            p2_bound: self.p2_bound,
            k_work: self.k_work,
        })
    }

    /// The pair of the mirrored region: `ĥ(t, x) = h(t, -x)`, `p̂₂ = -p₂(t, -x)`.
    pub fn mirrored(&self) -> AdmissiblePair {
        AdmissiblePair {
            region: self.region.mirrored(),
            kind: Kind::Mirrored(Box::new(self.clone())),
            p2_bound: self.p2_bound,
            k_work: self.k_work,
        }
    }

    /// `ĥ = β h` with a bump `β` on `[t0 - δ, t0 + δ]` whose slope keeps
    /// `||β'||₀ ||h||₀ < ε` over the working box.
    pub fn hhat(
        &self,
        epsilon: f64,
        delta: f64,
        t0: f64,
    ) -> Result<(AdmissiblePair, HhatInfo), PairError> {
        let (a, b) = self.region.interval();
        if !(epsilon > 0.0) {
            return Err(PairError::InvalidHhat(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !(delta > 0.0) || !(t0 - delta > a && t0 + delta < b) {
            return Err(PairError::InvalidHhat(format!(
                "window [{}, {}] is not inside ({a}, {b})",
                t0 - delta,
                t0 + delta
            )));
        }
        let h_sup = self.sampled_h_sup();
        if !(h_sup > 0.0) {
            return Err(PairError::InvalidHhat("h vanishes on every sample".into()));
        }
        let eta = 0.9 * epsilon * delta / (BUMP_SLOPE_BOUND * h_sup);
        let beta = TimeWeight::Bump { t0, delta, eta };
        let mut beta_prime_sup: f64 = 0.0;
        for j in 0..=100_000 {
            let t = a + (b - a) * j as f64 / 100_000.0;
            beta_prime_sup = beta_prime_sup.max(beta.derivative(t)?.abs());
        }
        let hhat = self.rescaled(beta)?;
        Ok((
            hhat,
            HhatInfo {
                t0,
                delta,
                eta,
                h_sup,
                beta_prime_sup,
            },
        ))
    }

    /// `max |h|` over deterministic samples of `I × B[0, K_work]` plus grid nodes.
    pub fn sampled_h_sup(&self) -> f64 {
        let (a, b) = self.region.interval();
        let n = self.region.dim();
        let mut halton = Halton::new(n + 1, 11);
        let mut sup: f64 = 0.0;
        for k in 0..4000 {
            let u = halton.next_point();
            let t = if k < 64 {
                a + (b - a) * k as f64 / 63.0
            } else {
                a + (b - a) * u[0]
            };
            let x = ball_point(&u[1..], self.k_work);
            if let Ok(v) = self.h(t, &x) {
                sup = sup.max(v.abs());
            }
            // the sup of ½d² type functions sits on the outer sphere
            let dir = sphere_point(&u[1..]);
            let xs: Vec<f64> = dir.iter().map(|d| d * self.k_work).collect();
            if let Ok(v) = self.h(t, &xs) {
                sup = sup.max(v.abs());
            }
        }
        sup
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn provenance(&self) -> Provenance {
        match &self.kind {
            Kind::Constructed(_) => Provenance::Constructed,
            Kind::HalfSquaredDistance => Provenance::HalfSquaredDistance,
            Kind::User { .. } => Provenance::User,
            Kind::Scaled { .. } => Provenance::Rescaled,
            Kind::Sum(..) => Provenance::Sum,
            Kind::Mirrored(_) => Provenance::Mirrored,
        }
    }

    /// Bound on `||p₂||` over the working box.
    pub fn p2_bound(&self) -> f64 {
        self.p2_bound
    }

    pub fn working_radius(&self) -> f64 {
        self.k_work
    }

    pub fn has_closed_form_gradients(&self) -> bool {
        match &self.kind {
            Kind::Constructed(_) | Kind::HalfSquaredDistance => true,
            Kind::User { .. } => false,
            Kind::Scaled { inner, beta } => {
                inner.has_closed_form_gradients() && !matches!(beta, TimeWeight::Expr(_))
            }
            Kind::Sum(p, q) => p.has_closed_form_gradients() && q.has_closed_form_gradients(),
            Kind::Mirrored(p) => p.has_closed_form_gradients(),
        }
    }

    /// `h ≥ 0` everywhere by construction.
    pub fn is_nonnegative(&self) -> bool {
        match &self.kind {
            Kind::Constructed(_) | Kind::HalfSquaredDistance => true,
            Kind::User { .. } => false,
            Kind::Scaled { inner, .. } | Kind::Mirrored(inner) => inner.is_nonnegative(),
            Kind::Sum(p, q) => p.is_nonnegative() && q.is_nonnegative(),
        }
    }

    pub fn summary(&self) -> PairSummary {
        PairSummary {
            provenance: self.provenance(),
            state_bound_m: self.region.state_bound(),
            p2_bound: self.p2_bound,
            working_radius: self.k_work,
            construction: match &self.kind {
                Kind::Constructed(c) => Some(c.clone()),
                _ => None,
            },
            closed_form_gradients: self.has_closed_form_gradients(),
        }
    }

    pub fn h(&self, t: f64, x: &[f64]) -> Result<f64, PairError> {
        match &self.kind {
            Kind::User { h, .. } => Ok(h.eval(t, x)?),
            Kind::Scaled { inner, beta } => Ok(beta.value(t)? * inner.h(t, x)?),
            Kind::Sum(p, q) => Ok(p.h(t, x)? + q.h(t, x)?),
            Kind::Mirrored(p) => p.h(t, &neg(x)),
            _ => Ok(self.eval(t, x)?.h),
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<PairEval, PairError> {
        match &self.kind {
            Kind::Constructed(c) => Ok(self.eval_constructed(c.r, t, x)),
            Kind::HalfSquaredDistance => {
                let q = join(t, x);
                let p = self.region.nearest_point(&q);
                let diff: Vec<f64> = q.iter().zip(&p).map(|(a, b)| a - b).collect();
                Ok(PairEval {
                    h: 0.5 * diff.iter().map(|v| v * v).sum::<f64>(),
                    dh_dt: diff[0],
                    grad_x: diff[1..].to_vec(),
                    p1: p[0],
                    p2: p[1..].to_vec(),
                })
            }
            Kind::User { h, p, cap_radius } => {
                let q = join(t, x);
                let value = h.eval(t, x)?;
                let mut failure = None;
                let grad = fd_gradient(
                    |z| match h.eval(z[0], &z[1..]) {
                        Ok(v) => v,
                        Err(e) => {
                            failure.get_or_insert(e);
                            f64::NAN
                        }
                    },
                    &q,
                );
                if let Some(e) = failure {
                    return Err(e.into());
                }
                let grad_x = grad[1..].to_vec();
                let (p1, p2) = match p {
                    Some(exprs) => {
                        let vals = exprs
                            .iter()
                            .map(|e| e.eval(t, x))
                            .collect::<Result<Vec<_>, _>>()?;
                        if vals.len() == x.len() {
                            (t, vals)
                        } else {
                            (vals[0], vals[1..].to_vec())
                        }
                    }
                    None => {
                        let nx = norm(x);
                        let r = cap_radius - 1.0;
                        if nx >= *cap_radius {
                            (t, x.iter().map(|v| v * r / nx).collect())
                        } else {
                            (t, x.iter().zip(&grad_x).map(|(a, g)| a - g).collect())
                        }
                    }
                };
                Ok(PairEval {
                    h: value,
                    dh_dt: grad[0],
                    grad_x,
                    p1,
                    p2,
                })
            }
            Kind::Scaled { inner, beta } => {
                let e = inner.eval(t, x)?;
                let (bv, bd) = (beta.value(t)?, beta.derivative(t)?);
                Ok(PairEval {
                    h: bv * e.h,
                    dh_dt: bd * e.h + bv * e.dh_dt,
                    grad_x: e.grad_x.iter().map(|g| bv * g).collect(),
                    p1: e.p1,
                    p2: e.p2,
                })
            }
            Kind::Sum(p, q) => {
                let (e, f) = (p.eval(t, x)?, q.eval(t, x)?);
                Ok(PairEval {
                    h: e.h + f.h,
                    dh_dt: e.dh_dt + f.dh_dt,
                    grad_x: e.grad_x.iter().zip(&f.grad_x).map(|(a, b)| a + b).collect(),
                    p1: e.p1,
                    p2: e.p2,
                })
            }
            Kind::Mirrored(p) => {
                let e = p.eval(t, &neg(x))?;
                Ok(PairEval {
                    h: e.h,
                    dh_dt: e.dh_dt,
                    grad_x: neg(&e.grad_x),
                    p1: e.p1,
                    p2: neg(&e.p2),
                })
            }
        }
    }

    fn eval_constructed(&self, r: f64, t: f64, x: &[f64]) -> PairEval {
        let nx = norm(x);
        let d_c = (nx - r).max(0.0);
        // x - P_C(x) = d_C ∇d_C
        let toward: Vec<f64> = if d_c > 0.0 {
            x.iter().map(|v| v * d_c / nx).collect()
        } else {
            vec![0.0; x.len()]
        };
        if d_c >= 1.0 {
            return PairEval {
                h: 0.5 * d_c * d_c,
                dh_dt: 0.0,
                grad_x: toward.clone(),
                p1: t,
                p2: x.iter().zip(&toward).map(|(a, b)| a - b).collect(),
            };
        }
        let q = join(t, x);
        let proj = self.region.nearest_point(&q);
        let half_d2 = 0.5
            * q.iter()
                .zip(&proj)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
        let (sigma, dsigma) = smoothstep(d_c);
        let phi = half_d2 * sigma;
        let dphi_dt = sigma * (t - proj[0]);
        let grad_phi: Vec<f64> = (0..x.len())
            .map(|i| {
                let radial = if d_c > 0.0 { x[i] / nx } else { 0.0 };
                sigma * (x[i] - proj[i + 1]) + half_d2 * dsigma * radial
            })
            .collect();
        let (h, dh_dt, grad_x) = if d_c == 0.0 {
            (phi, dphi_dt, grad_phi)
        } else {
            let w = 1.0 - d_c * d_c;
            let grad = (0..x.len())
                .map(|i| -2.0 * toward[i] * phi + w * grad_phi[i] + toward[i])
                .collect();
            (w * phi + 0.5 * d_c * d_c, w * dphi_dt, grad)
        };
        let p2 = x.iter().zip(&grad_x).map(|(a, g)| a - g).collect();
        PairEval {
            h,
            dh_dt,
            grad_x,
            p1: t,
            p2,
        }
    }

    /// Identifies how `p` is produced, so sums can check they share it.
    fn p_signature(&self) -> String {
        match &self.kind {
            Kind::Constructed(c) => format!("constructed:{}", c.r),
            Kind::HalfSquaredDistance => "projection".into(),
            Kind::User { h, p: None, .. } => format!("user-gradient:{h}"),
            Kind::User { p: Some(p), .. } => {
                format!(
                    "user:{}",
                    p.iter()
                        .map(|e| e.to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                )
            }
            Kind::Scaled { inner, .. } => inner.p_signature(),
            Kind::Sum(p, _) => p.p_signature(),
            Kind::Mirrored(p) => format!("mirror:{}", p.p_signature()),
        }
    }
}

fn neg(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| -v).collect()
}

fn check_slices(region: &Region) -> Result<(), PairError> {
    let (a, b) = region.interval();
    for j in 0..=50 {
        let t = if j == 50 {
            b
        } else {
            a + (b - a) * j as f64 / 50.0
        };
        if region.slice_point(t).is_none() {
            return Err(PairError::EmptySlice(t));
        }
    }
    Ok(())
}

/// Unit vector from a point of `[0, 1)^n` (Box-Muller-free: normalised cube point).
pub(crate) fn sphere_point(u: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = u.iter().map(|s| 2.0 * s - 1.0).collect();
    let len = norm(&v);
    if len < 1e-12 {
        let mut e = vec![0.0; u.len()];
        if let Some(first) = e.first_mut() {
            *first = 1.0;
        }
        return e;
    }
    v.iter().map(|s| s / len).collect()
}

/// Point of `B[0, radius]` from a point of `[0, 1)^n`, clamped radially.
pub(crate) fn ball_point(u: &[f64], radius: f64) -> Vec<f64> {
    let v: Vec<f64> = u.iter().map(|s| radius * (2.0 * s - 1.0)).collect();
    let len = norm(&v);
    if len > radius {
        v.iter().map(|s| s * radius / len).collect()
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn independent_three_branch(t: f64, x: f64) -> f64 {
        // R = [0,1] × [-1,1], r = 1; d_R is the 1-D distance to [-1,1] in x
        // combined with the slab distance in t
        let dt = if t < 0.0 {
            -t
        } else if t > 1.0 {
            t - 1.0
        } else {
            0.0
        };
        let dx = (x.abs() - 1.0).max(0.0);
        let dr2 = dt * dt + dx * dx;
        let dc = (x.abs() - 1.0).max(0.0);
        let sigma = if dc >= 1.0 {
            0.0
        } else {
            1.0 - dc * dc * (3.0 - 2.0 * dc)
        };
        let phi = 0.5 * dr2 * sigma;
        if dc == 0.0 {
            phi
        } else if dc < 1.0 {
            (1.0 - dc * dc) * phi + 0.5 * dc * dc
        } else {
            0.5 * dc * dc
        }
    }

    #[test]
    fn constructed_value_matches_independent_formula() {
        let region = Region::tube(0.0, 1.0, vec![0.0], 1.0).unwrap();
        let pair = AdmissiblePair::construct(&region).unwrap();
        let e = pair.eval(0.5, &[1.5]).unwrap();
        assert!((e.h - 0.171875).abs() < 1e-12);
        assert!((e.h - independent_three_branch(0.5, 1.5)).abs() < 1e-12);
        for &(t, x) in &[
            (0.2, 0.3),
            (0.9, -1.7),
            (0.4, 2.5),
            (0.0, 1.99),
            (0.7, -1.0),
        ] {
            assert!((pair.h(t, &[x]).unwrap() - independent_three_branch(t, x)).abs() < 1e-12);
        }
    }

    #[test]
    fn constructed_pair_fixes_region() {
        let region = Region::ball(0.0, 1.0, vec![0.0, 0.0, 0.0], 2.0).unwrap();
        let pair = AdmissiblePair::construct(&region).unwrap();
        let e = pair.eval(0.5, &[0.3, -1.0]).unwrap();
        assert_eq!(e.h, 0.0);
        assert_eq!(e.grad_x, vec![0.0, 0.0]);
        assert_eq!((e.p1, e.p2.clone()), (0.5, vec![0.3, -1.0]));
    }

    #[test]
    fn half_squared_distance_closed_form() {
        let region = Region::ball(0.0, 1.0, vec![0.0, 0.0, 0.0], 2.0).unwrap();
        let pair = AdmissiblePair::half_squared_distance(&region).unwrap();
        let e = pair.eval(0.0, &[3.0, 0.0]).unwrap();
        assert!((e.h - 0.5).abs() < 1e-15);
        assert_eq!((e.dh_dt, e.grad_x.clone()), (0.0, vec![1.0, 0.0]));
        assert_eq!((e.p1, e.p2), (0.0, vec![2.0, 0.0]));
    }

    #[test]
    fn user_pair_rejects_flipped_sign() {
        let region = Region::tube(0.0, 1.0, vec![0.0], 1.0).unwrap();
        let good = Expression::parse("x1^2 - 1", 1).unwrap();
        assert!(AdmissiblePair::from_user(&region, good, None).is_ok());
        let flipped = Expression::parse("1 - x1^2", 1).unwrap();
        assert!(matches!(
            AdmissiblePair::from_user(&region, flipped, None),
            Err(PairError::H1Violation { .. })
        ));
    }

    #[test]
    fn rescale_and_sum() {
        let region = Region::ball(0.0, 1.0, vec![0.0, 0.0], 2.0).unwrap();
        let pair = AdmissiblePair::half_squared_distance(&region).unwrap();
        let same = pair.rescaled(TimeWeight::Constant(1.0)).unwrap();
        assert_eq!(
            pair.eval(0.3, &[3.0]).unwrap(),
            same.eval(0.3, &[3.0]).unwrap()
        );
        assert!(pair.rescaled(TimeWeight::Constant(-1.0)).is_err());
        let doubled = pair.sum(&pair).unwrap();
        assert!(
            (doubled.h(0.3, &[3.0]).unwrap() - 2.0 * pair.h(0.3, &[3.0]).unwrap()).abs() < 1e-15
        );
    }

    #[test]
    fn bump_slope_stays_under_epsilon() {
        let region = Region::ball(0.0, 1.0, vec![0.0, 0.0, 0.0], 2.0).unwrap();
        let pair = AdmissiblePair::half_squared_distance(&region).unwrap();
        let (hhat, info) = pair.hhat(0.1, 0.2, 0.5).unwrap();
        assert!(info.beta_prime_sup * info.h_sup < 0.1);
        assert_eq!(
            hhat.h(0.0, &[3.0, 0.0]).unwrap(),
            pair.h(0.0, &[3.0, 0.0]).unwrap()
        );
        assert!(hhat.h(0.5, &[3.0, 0.0]).unwrap() > pair.h(0.5, &[3.0, 0.0]).unwrap());
        assert!(pair.hhat(0.1, 0.6, 0.5).is_err());
    }

    #[test]
    fn mirrored_pair() {
        let region = Region::tube(0.0, 1.0, vec![1.0], 0.5).unwrap();
        let pair = AdmissiblePair::half_squared_distance(&region).unwrap();
        let m = pair.mirrored();
        let e = m.eval(0.0, &[-3.0]).unwrap();
        assert!((e.h - 0.5 * 1.5f64.powi(2)).abs() < 1e-12);
        assert_eq!(e.p2, vec![-1.5]);
        assert_eq!(e.grad_x, vec![-1.5]);
    }
}
