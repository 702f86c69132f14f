//! Sampling certificates for the region hypotheses and the barrier verdict.
//!
//! Every "for all x" becomes a deterministic stratified sample of the working
//! box `I × B[0, K_work]`. A pass means no violation was found at the sampled
//! resolution.

pub mod sampling;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::field::VectorField;
use crate::path::{Grid, SampledPath};
use crate::regions::{
    ball_point as ball, fd_gradient, sphere_point as sphere, AdmissiblePair, HhatInfo, Region,
};
use crate::vecops::{dist, dot, join, norm};
use sampling::Halton;

/// Slack for non-strict inequalities.
pub const TOL: f64 = 1e-8;
/// Margin demanded by strict inequalities.
pub const STRICT_MARGIN: f64 = 1e-10;
/// Slack of the sign test `h ≤ 0 ⇔ (t, x) ∈ R`.
pub const H1_TOL: f64 = 1e-9;
/// Offset of the boundary shell samples.
pub const SHELL_OFFSET: f64 = 1e-3;
/// Interior margin for the strict slice test.
pub const INTERIOR_MARGIN: f64 = 1e-6;
pub const DEFAULT_SAMPLES: usize = 10_000;
/// Relative gap allowed between closed-form and difference gradients.
pub const H2_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    VacuousPass,
    NotApplicable,
}

impl Verdict {
    pub fn passed(self) -> bool {
        matches!(self, Verdict::Pass | Verdict::VacuousPass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub hypothesis: String,
    pub verdict: Verdict,
    /// Largest violation found; `≤ tolerance` on a pass.
    pub worst: f64,
    /// `(t, x)` of the worst sample.
    pub witness: Option<Vec<f64>>,
    pub samples: usize,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, f64>,
    pub note: String,
}

impl CheckReport {
    fn judge(
        hypothesis: &str,
        worst: Option<(f64, Vec<f64>)>,
        samples: usize,
        tolerance: f64,
    ) -> Self {
        match worst {
            None => CheckReport {
                hypothesis: hypothesis.into(),
                verdict: Verdict::VacuousPass,
                worst: f64::NEG_INFINITY,
                witness: None,
                samples,
                tolerance,
                values: BTreeMap::new(),
                note: "no sample falls in the constrained set".into(),
            },
            Some((worst, witness)) => {
                let pass = worst <= tolerance;
                CheckReport {
                    hypothesis: hypothesis.into(),
                    verdict: if pass { Verdict::Pass } else { Verdict::Fail },
                    worst,
                    witness: Some(witness),
                    samples,
                    tolerance,
                    values: BTreeMap::new(),
                    note: if pass {
                        format!("no violation found at resolution {samples}")
                    } else {
                        "violation at witness".into()
                    },
                }
            }
        }
    }

    fn inconclusive(
        hypothesis: &str,
        witness: Vec<f64>,
        samples: usize,
        tolerance: f64,
        message: String,
    ) -> Self {
        CheckReport {
            hypothesis: hypothesis.into(),
            verdict: Verdict::Inconclusive,
            worst: f64::NAN,
            witness: Some(witness),
            samples,
            tolerance,
            values: BTreeMap::new(),
            note: message,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }

    fn with_value(mut self, key: &str, value: f64) -> Self {
        self.values.insert(key.into(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoint {
    pub q: Vec<f64>,
    pub inside: bool,
}

/// Stratified deterministic samples of `[t_lo, t_hi] × B[0, K_work]`: points of
/// `R`, a shell at distance `SHELL_OFFSET` on both sides of `∂R`, the bulk of
/// the working ball and its outer layer.
pub fn stratified_samples(
    pair: &AdmissiblePair,
    count: usize,
    seed: u64,
    t_range: (f64, f64),
) -> Vec<SamplePoint> {
    let region = pair.region();
    let n = region.dim();
    let m = region.state_bound();
    let kw = pair.working_radius();
    let (t_lo, t_hi) = t_range;
    let lerp = |u: f64| t_lo + (t_hi - t_lo) * u;
    let mut halton = Halton::new(n + 2, seed);
    let n_inside = count / 4;
    let n_shell = count / 4;
    let n_far = count / 5;
    let n_mid = count - n_inside - n_shell - n_far;
    let mut qs: Vec<Vec<f64>> = Vec::with_capacity(count);

    let mut found = 0;
    for _ in 0..50 * n_inside {
        if found == n_inside {
            break;
        }
        let u = halton.next_point();
        let q = join(lerp(u[0]), &ball(&u[2..], m));
        if region.contains_point(&q) {
            qs.push(q);
            found += 1;
        }
    }
    let mut shell = 0;
    for _ in 0..20 * n_shell {
        if shell >= n_shell {
            break;
        }
        let u = halton.next_point();
        let q = join(lerp(u[0]), &ball(&u[2..], kw));
        if let Some((b, normal)) = region.boundary_hit(&q) {
            for s in [SHELL_OFFSET, -SHELL_OFFSET] {
                let p: Vec<f64> = b.iter().zip(&normal).map(|(bi, vi)| bi + s * vi).collect();
                if p[0] >= t_lo && p[0] <= t_hi {
                    qs.push(p);
                    shell += 1;
                }
            }
        }
    }
    for _ in 0..n_mid + (n_inside - found) + n_shell.saturating_sub(shell) {
        let u = halton.next_point();
        qs.push(join(lerp(u[0]), &ball(&u[2..], kw)));
    }
    for _ in 0..n_far {
        let u = halton.next_point();
        let radius = kw - u[1];
        let dir = sphere(&u[2..]);
        qs.push(join(
            lerp(u[0]),
            &dir.iter().map(|d| d * radius).collect::<Vec<_>>(),
        ));
    }
    qs.into_par_iter()
        .map(|q| {
            let inside = region.contains_point(&q);
            SamplePoint { q, inside }
        })
        .collect()
}

type Measured = Result<Option<f64>, String>;

/// Parallel evaluation reduced to the largest value, ties to the lowest index.
fn reduce_worst(
    points: &[SamplePoint],
    f: impl Fn(&SamplePoint) -> Measured + Sync,
) -> Result<Option<(f64, usize)>, (String, usize)> {
    let values: Vec<Measured> = points.par_iter().map(&f).collect();
    let mut worst: Option<(f64, usize)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match v {
            Err(e) => return Err((e, i)),
            Ok(None) => {}
            Ok(Some(v)) => {
                if worst.is_none_or(|(w, _)| v > w || v.is_nan()) {
                    worst = Some((v, i));
                }
            }
        }
    }
    Ok(worst)
}

/// `(H0)`: a member of `R_t` at every grid time.
pub fn check_h0(region: &Region, grid: &Grid) -> CheckReport {
    slice_check("H0", grid, |t| region.slice_point(t).is_some())
}

/// `(H0')`: a point at depth `INTERIOR_MARGIN` inside `R_t` at every grid time.
pub fn check_h0_prime(region: &Region, grid: &Grid) -> CheckReport {
    slice_check("H0'", grid, |t| {
        region.slice_interior_point(t, INTERIOR_MARGIN).is_some()
    })
}

fn slice_check(name: &str, grid: &Grid, found: impl Fn(f64) -> bool + Sync) -> CheckReport {
    let nodes: Vec<f64> = grid.nodes().collect();
    let ok: Vec<bool> = nodes.par_iter().map(|&t| found(t)).collect();
    let empty: Vec<f64> = nodes
        .iter()
        .zip(&ok)
        .filter(|(_, ok)| !**ok)
        .map(|(t, _)| *t)
        .collect();
    let mut report = CheckReport::judge(
        name,
        Some(match empty.first() {
            Some(&t) => (1.0, vec![t]),
            None => (0.0, vec![nodes[0]]),
        }),
        nodes.len(),
        0.0,
    );
    report.witness = empty.first().map(|&t| vec![t]);
    report = report.with_value("empty_slices", empty.len() as f64);
    if !empty.is_empty() {
        report.note = format!("empty slice at t = {}", empty[0]);
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum H5Variant {
    /// Non-strict disjunction on the supplied members.
    Plain,
    /// The same test on homotopy solutions.
    Homotopy,
    /// Strict inequalities.
    Strict,
}

/// `(H5)`: `h(a, u(a)) ≤ 0` or `h(a, u(a)) ≤ h(b, u(b))` on candidates with
/// `||u||₀ ≤ C`; the strict variant asks for both inequalities with margin.
pub fn check_h5(
    candidates: &[SampledPath],
    pair: &AdmissiblePair,
    c: f64,
    variant: H5Variant,
) -> CheckReport {
    let name = match variant {
        H5Variant::Plain => "H5",
        H5Variant::Homotopy => "H5'",
        H5Variant::Strict => "H5''",
    };
    let tolerance = if variant == H5Variant::Strict {
        -STRICT_MARGIN
    } else {
        TOL
    };
    let mut worst: Option<(f64, Vec<f64>)> = None;
    let mut failing = Vec::new();
    let mut used = 0;
    for (i, u) in candidates.iter().enumerate() {
        if u.sup_norm() > c {
            continue;
        }
        used += 1;
        let (a, b) = (u.grid().a(), u.grid().b());
        let (ha, hb) = match (pair.h(a, u.first()), pair.h(b, u.last())) {
            (Ok(ha), Ok(hb)) => (ha, hb),
            (Err(e), _) | (_, Err(e)) => {
                return CheckReport::inconclusive(
                    name,
                    join(a, u.first()),
                    candidates.len(),
                    tolerance,
                    e.to_string(),
                )
            }
        };
        // the disjunction fails only when both margins are violated
        let violation = ha.min(ha - hb);
        if violation > tolerance {
            failing.push(i);
        }
        if worst.as_ref().is_none_or(|(w, _)| violation > *w) {
            worst = Some((violation, join(a, u.first())));
        }
    }
    let mut report = CheckReport::judge(name, worst, used, tolerance);
    if !failing.is_empty() {
        report.note = format!("failing candidates: {failing:?}");
    }
    report.with_value("candidates_checked", used as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierMode {
    /// `w(a) ≤ z`.
    Initial,
    /// `w(a) ≤ w(b)`.
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierInstance {
    /// Scalar path.
    pub w: SampledPath,
    pub z: f64,
    pub mode: BarrierMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierVerdict {
    BelowZ,
    ConstantK(f64),
    HypothesesViolated,
}

/// Slope tolerance of the barrier hypotheses.
pub const BARRIER_SLOPE_TOL: f64 = 1e-8;

/// Discrete barrier check for piecewise-linear `w`: if `w` does not increase
/// on any interval reaching above `z` and the endpoint condition holds, then
/// either `w ≤ z` everywhere or `w` is the constant `w(a)`.
pub fn barrier_verdict(b: &BarrierInstance) -> BarrierVerdict {
    assert_eq!(b.w.dim(), 1, "barrier path must be scalar");
    let w = b.w.values();
    let h = b.w.grid().step();
    let increasing_above = w
        .windows(2)
        .any(|p| p[0].max(p[1]) > b.z && (p[1] - p[0]) / h > BARRIER_SLOPE_TOL);
    let endpoint_ok = match b.mode {
        BarrierMode::Initial => w[0] <= b.z,
        BarrierMode::Periodic => w[0] <= w[w.len() - 1],
    };
    if increasing_above || !endpoint_ok {
        return BarrierVerdict::HypothesesViolated;
    }
    if w.iter().all(|&v| v <= b.z) {
        BarrierVerdict::BelowZ
    } else {
        BarrierVerdict::ConstantK(w[0])
    }
}

/// Sample-based checks of one pair.
pub struct Certifier<'a> {
    pair: &'a AdmissiblePair,
    seed: u64,
    points: Vec<SamplePoint>,
}

impl<'a> Certifier<'a> {
    pub fn new(pair: &'a AdmissiblePair, samples: usize, seed: u64) -> Self {
        let points = stratified_samples(pair, samples, seed, pair.region().interval());
        Certifier { pair, seed, points }
    }

    pub fn points(&self) -> &[SamplePoint] {
        &self.points
    }

    fn finish(
        &self,
        name: &str,
        result: Result<Option<(f64, usize)>, (String, usize)>,
        tolerance: f64,
    ) -> CheckReport {
        self.finish_on(name, &self.points, result, tolerance)
    }

    fn finish_on(
        &self,
        name: &str,
        points: &[SamplePoint],
        result: Result<Option<(f64, usize)>, (String, usize)>,
        tolerance: f64,
    ) -> CheckReport {
        match result {
            Err((message, i)) => CheckReport::inconclusive(
                name,
                points[i].q.clone(),
                points.len(),
                tolerance,
                message,
            ),
            Ok(worst) => CheckReport::judge(
                name,
                worst.map(|(w, i)| (w, points[i].q.clone())),
                points.len(),
                tolerance,
            ),
        }
    }

    /// `(H1)`: `h ≤ 0` on `R`, and `h > 0` at sampled points off `R` (a
    /// nonpositive value off `R` counts as a violation of size `d_R`).
    pub fn h1(&self) -> CheckReport {
        let region = self.pair.region();
        let result = reduce_worst(&self.points, |s| {
            let h = self.pair.h(s.q[0], &s.q[1..]).map_err(|e| e.to_string())?;
            Ok(Some(if s.inside {
                h.max(0.0)
            } else if h <= 0.0 {
                region.distance(&s.q)
            } else {
                0.0
            }))
        });
        self.finish("H1", result, H1_TOL)
    }

    /// `(H2)`, as far as it is checkable: the closed-form gradient of `h`
    /// matches central differences of `h`.
    pub fn h2(&self) -> CheckReport {
        let result = reduce_worst(&self.points, |s| {
            let e = self
                .pair
                .eval(s.q[0], &s.q[1..])
                .map_err(|e| e.to_string())?;
            let mut failure = None;
            let fd = fd_gradient(
                |q| match self.pair.h(q[0], &q[1..]) {
                    Ok(v) => v,
                    Err(err) => {
                        failure = Some(err.to_string());
                        f64::NAN
                    }
                },
                &s.q,
            );
            if let Some(message) = failure {
                return Err(message);
            }
            let closed = join(e.dh_dt, &e.grad_x);
            Ok(Some(dist(&fd, &closed) / (1.0 + norm(&closed))))
        });
        let mut report = self.finish("H2", result, H2_TOL);
        if !self.pair.has_closed_form_gradients() {
            report.note = format!("{}; gradients are finite differences", report.note);
        }
        report.note = format!("{}; measurability in t is not checked", report.note);
        report
    }

    /// `(H3)`: `p(t, x) = (t, x)` on `R` and `<∇ₓh, p₂ - x> ≤ 0` off `R`; also
    /// reports the sampled sup of `||p₂||`.
    pub fn h3(&self) -> CheckReport {
        let result = reduce_worst(&self.points, |s| {
            let (t, x) = (s.q[0], &s.q[1..]);
            let e = self.pair.eval(t, x).map_err(|e| e.to_string())?;
            Ok(Some(if s.inside {
                dist(&join(e.p1, &e.p2), &s.q)
            } else {
                let step: Vec<f64> = e.p2.iter().zip(x).map(|(p, x)| p - x).collect();
                dot(&e.grad_x, &step)
            }))
        });
        let sup = self
            .points
            .par_iter()
            .map(|s| {
                self.pair
                    .eval(s.q[0], &s.q[1..])
                    .map(|e| norm(&e.p2))
                    .unwrap_or(f64::NAN)
            })
            .reduce(|| 0.0, f64::max);
        let mut report = self
            .finish("H3", result, TOL)
            .with_value("p2_sup", sup)
            .with_value("p2_bound", self.pair.p2_bound());
        if sup > self.pair.p2_bound() * (1.0 + 1e-12) + 1e-12 {
            report.verdict = Verdict::Fail;
            report.note = format!(
                "sampled ||p2|| = {sup} exceeds the stored bound {}",
                self.pair.p2_bound()
            );
        }
        report
    }

    fn transversality(&self, field: &VectorField, s: &SamplePoint) -> Measured {
        let e = self
            .pair
            .eval(s.q[0], &s.q[1..])
            .map_err(|e| e.to_string())?;
        let f = field.eval(e.p1, &e.p2).map_err(|e| e.to_string())?;
        Ok(Some(e.dh_dt + dot(&e.grad_x, &f)))
    }

    /// `(H4)`: `∂h/∂t + <∇ₓh, f(p)> ≤ 0` off `R`.
    pub fn h4(&self, field: &VectorField) -> CheckReport {
        let result = reduce_worst(&self.points, |s| {
            if s.inside {
                Ok(None)
            } else {
                self.transversality(field, s)
            }
        });
        self.finish("H4", result, TOL)
    }

    /// `(H4')` on `[t0 - δ, t0 + δ]`. Reports the largest certifiable `ε`
    /// (`-max L` over the window); with `epsilon` given the check demands
    /// `max L ≤ -epsilon`, otherwise any positive certified `ε` passes.
    pub fn h4_prime(
        &self,
        field: &VectorField,
        epsilon: Option<f64>,
        delta: f64,
        t0: f64,
    ) -> CheckReport {
        let (a, b) = self.pair.region().interval();
        if !(delta > 0.0 && t0 - delta > a && t0 + delta < b) {
            let mut r = CheckReport::inconclusive(
                "H4'",
                vec![t0],
                0,
                0.0,
                "window is not inside the open interval".into(),
            );
            r.verdict = Verdict::Fail;
            return r;
        }
        let points = stratified_samples(
            self.pair,
            self.points.len(),
            self.seed + 1,
            (t0 - delta, t0 + delta),
        );
        let result = reduce_worst(&points, |s| {
            if s.inside {
                Ok(None)
            } else {
                self.transversality(field, s)
            }
        });
        let certified = match &result {
            Ok(Some((w, _))) => -w,
            _ => f64::NAN,
        };
        let target = epsilon.unwrap_or(0.0);
        // pass ⇔ max L ≤ -ε (strictly below zero when no ε is requested)
        let tolerance = if epsilon.is_some() {
            -target + TOL
        } else {
            -STRICT_MARGIN
        };
        self.finish_on("H4'", &points, result, tolerance)
            .with_value("certified_epsilon", certified)
            .with_value("delta", delta)
            .with_value("t0", t0)
    }

    /// Tries windows centred at the midpoint of `I`, widest first, and returns
    /// the first `(H4')` report with a positive certified `ε`.
    pub fn search_h4_prime(&self, field: &VectorField) -> Option<(f64, f64, f64, CheckReport)> {
        let (a, b) = self.pair.region().interval();
        let t0 = 0.5 * (a + b);
        for frac in [0.4, 0.25, 0.1, 0.05] {
            let delta = frac * (b - a);
            let report = self.h4_prime(field, None, delta, t0);
            let eps = report
                .values
                .get("certified_epsilon")
                .copied()
                .unwrap_or(f64::NAN);
            if report.passed() && eps > 0.0 {
                return Some((eps, delta, t0, report));
            }
        }
        None
    }

    /// `(H4'')`: the transversality inequality on the band `-ε < h < 0`.
    pub fn h4_double_prime(&self, field: &VectorField, epsilon: f64) -> CheckReport {
        let result = reduce_worst(&self.points, |s| {
            let h = self.pair.h(s.q[0], &s.q[1..]).map_err(|e| e.to_string())?;
            if h > -epsilon && h < 0.0 {
                self.transversality(field, s)
            } else {
                Ok(None)
            }
        });
        let mut report = self.finish("H4''", result, TOL);
        if report.verdict == Verdict::VacuousPass {
            report.note = "band h in (-eps, 0) is empty on the samples".into();
        }
        report.with_value("epsilon", epsilon)
    }

    /// `(H6)` for a companion `ĥ`: a time `t₁` where `ĥ = h` on every sampled
    /// state, a time `t₂` where `ĥ ≠ h` at every sampled state off `R_{t₂}`, and
    /// `ĥ` passing `(H1)`, `(H3)` and `(H4)`.
    pub fn h6(
        &self,
        hhat: &AdmissiblePair,
        field: &VectorField,
        info: Option<&HhatInfo>,
    ) -> CheckReport {
        let region = self.pair.region();
        let (a, b) = region.interval();
        let n = region.dim();
        let kw = self.pair.working_radius();
        let mut halton = Halton::new(n, self.seed + 2);
        let states: Vec<Vec<f64>> = (0..2000).map(|_| ball(&halton.next_point(), kw)).collect();
        let mut times: Vec<f64> = (0..=200).map(|j| a + (b - a) * j as f64 / 200.0).collect();
        if let Some(info) = info {
            times.push(info.t0);
        }
        let agree = |t: f64| {
            states
                .iter()
                .all(|x| match (self.pair.h(t, x), hhat.h(t, x)) {
                    (Ok(h), Ok(g)) => (g - h).abs() <= 1e-12 * (1.0 + h.abs()),
                    _ => false,
                })
        };
        let differs = |t: f64| {
            states.iter().filter(|x| !region.contains(t, x)).all(|x| {
                match (self.pair.h(t, x), hhat.h(t, x)) {
                    (Ok(h), Ok(g)) => g != h,
                    _ => false,
                }
            })
        };
        let t1 = times.iter().copied().find(|&t| agree(t));
        let t2 = times.iter().rev().copied().find(|&t| differs(t));
        let sub = Certifier::new(hhat, self.points.len(), self.seed);
        let checks = [sub.h1(), sub.h3(), sub.h4(field)];
        let sub_ok = checks.iter().all(|c| c.passed());
        let ok = t1.is_some() && t2.is_some() && sub_ok;
        let mut report = CheckReport {
            hypothesis: "H6".into(),
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            worst: checks
                .iter()
                .map(|c| c.worst)
                .fold(f64::NEG_INFINITY, f64::max),
            witness: checks
                .iter()
                .find(|c| !c.passed())
                .and_then(|c| c.witness.clone()),
            samples: states.len() * times.len(),
            tolerance: TOL,
            values: BTreeMap::new(),
            note: String::new(),
        };
        if let Some(t) = t1 {
            report.values.insert("t1".into(), t);
        }
        if let Some(t) = t2 {
            report.values.insert("t2".into(), t);
        }
        for c in &checks {
            report
                .values
                .insert(format!("{}_worst", c.hypothesis), c.worst);
        }
        if let Some(info) = info {
            report.values.insert("eta".into(), info.eta);
            report.values.insert(
                "beta_prime_sup_times_h_sup".into(),
                info.beta_prime_sup * info.h_sup,
            );
        }
        report.note = match (t1, t2, sub_ok) {
            (None, _, _) => "no time where the two functions agree".into(),
            (_, None, _) => "no time where the two functions differ off R".into(),
            (_, _, false) => "companion fails H1, H3 or H4".into(),
            _ => format!("no violation found at resolution {}", self.points.len()),
        };
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expression;

    fn example() -> (AdmissiblePair, VectorField) {
        let region = Region::ball(0.0, 1.0, vec![0.0, 0.0, 0.0], 2.0).unwrap();
        let pair = AdmissiblePair::half_squared_distance(&region).unwrap();
        let field = VectorField::parse(&["-2*x1*exp(-x2)", "-x2*exp(-x1)"], 2).unwrap();
        (pair, field)
    }

    #[test]
    fn slices_of_balls_and_flat_sets() {
        let grid = Grid::new(0.0, 1.0, 20).unwrap();
        let ball = Region::ball(0.0, 1.0, vec![0.0, 0.0, 0.0], 2.0).unwrap();
        assert!(check_h0(&ball, &grid).passed());
        assert!(check_h0_prime(&ball, &grid).passed());
        let flat = Region::boxed(0.0, 1.0, vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
        assert!(check_h0(&flat, &grid).passed());
        let r = check_h0_prime(&flat, &grid);
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.witness.is_some());
        let small = Region::ball(0.0, 1.0, vec![0.0, 0.0], 0.5).unwrap();
        assert_eq!(check_h0(&small, &grid).verdict, Verdict::Fail);
    }

    #[test]
    fn example_pair_passes_h1_h3_h4() {
        let (pair, field) = example();
        let c = Certifier::new(&pair, 2000, 0);
        for r in [c.h1(), c.h3(), c.h4(&field)] {
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn outward_field_fails_h4() {
        let (pair, _) = example();
        let outward = VectorField::parse(&["x1", "x2"], 2).unwrap();
        let r = Certifier::new(&pair, 1000, 0).h4(&outward);
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.worst > TOL && r.witness.is_some());
    }

    #[test]
    fn flipped_h_fails_h1() {
        let region = Region::tube(0.0, 1.0, vec![0.0], 1.0).unwrap();
        let good =
            AdmissiblePair::from_user(&region, Expression::parse("x1^2 - 1", 1).unwrap(), None)
                .unwrap();
        assert!(Certifier::new(&good, 500, 0).h1().passed());
        let flipped = AdmissiblePair::from_user_unchecked(
            &region,
            Expression::parse("1 - x1^2", 1).unwrap(),
            None,
        )
        .unwrap();
        let r = Certifier::new(&flipped, 500, 0).h1();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.witness.is_some() && r.worst > H1_TOL);
    }

    #[test]
    fn band_check_is_vacuous_for_nonnegative_h() {
        let (pair, field) = example();
        let r = Certifier::new(&pair, 1000, 0).h4_double_prime(&field, 0.1);
        assert_eq!(r.verdict, Verdict::VacuousPass);
    }

    #[test]
    fn h5_variants() {
        let region = Region::tube(0.0, 1.0, vec![0.0], 1.0).unwrap();
        let pair =
            AdmissiblePair::from_user(&region, Expression::parse("x1^2 - 1", 1).unwrap(), None)
                .unwrap();
        let grid = Grid::new(0.0, 1.0, 4).unwrap();
        // h(a, u(a)) = -0.2 wins regardless of the end value
        let inside = SampledPath::from_fn(grid, 1, |t| vec![0.8944271909999159 + 2.0 * t]);
        assert!(check_h5(&[inside], &pair, 10.0, H5Variant::Plain).passed());
        // h = 0.1 at both ends
        let x = 1.1f64.sqrt();
        let level = SampledPath::constant(grid, &[x]);
        assert!(check_h5(std::slice::from_ref(&level), &pair, 10.0, H5Variant::Plain).passed());
        assert_eq!(
            check_h5(std::slice::from_ref(&level), &pair, 10.0, H5Variant::Strict).verdict,
            Verdict::Fail
        );
        // candidates above C are skipped
        assert_eq!(
            check_h5(&[level], &pair, 1.0, H5Variant::Strict).verdict,
            Verdict::VacuousPass
        );
    }

    #[test]
    fn barrier_examples() {
        let grid = Grid::new(0.0, 1.0, 10).unwrap();
        let z = 0.5;
        let flat = SampledPath::constant(grid, &[z + 1.0]);
        let v = barrier_verdict(&BarrierInstance {
            w: flat,
            z,
            mode: BarrierMode::Periodic,
        });
        assert_eq!(v, BarrierVerdict::ConstantK(z + 1.0));
        let down = SampledPath::from_fn(grid, 1, |t| vec![z - t]);
        assert_eq!(
            barrier_verdict(&BarrierInstance {
                w: down,
                z,
                mode: BarrierMode::Initial
            }),
            BarrierVerdict::BelowZ
        );
        let up = SampledPath::from_fn(grid, 1, |t| vec![z + t]);
        assert_eq!(
            barrier_verdict(&BarrierInstance {
                w: up,
                z,
                mode: BarrierMode::Periodic
            }),
            BarrierVerdict::HypothesesViolated
        );
    }

    #[test]
    fn h6_with_companion() {
        let (pair, field) = example();
        let c = Certifier::new(&pair, 1000, 0);
        let same = c.h6(&pair, &field, None);
        assert_eq!(same.verdict, Verdict::Fail);
        let (hhat, info) = pair.hhat(1e-4, 0.2, 0.5).unwrap();
        let r = c.h6(&hhat, &field, Some(&info));
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.values["t1"], 0.0);
    }

    #[test]
    fn reports_are_deterministic() {
        let (pair, field) = example();
        let a = Certifier::new(&pair, 800, 3).h4(&field);
        let b = Certifier::new(&pair, 800, 3).h4(&field);
        assert_eq!(a, b);
    }
}
