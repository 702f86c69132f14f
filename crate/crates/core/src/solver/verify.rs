//! Post-hoc checks of a computed path.

use std::collections::BTreeMap;

use serde::Serialize;

use super::operators::{modified_field_path, phi_tilde};
use super::{BcKind, Operator, ProblemSpec, SolveError};
use crate::hypotheses::{CheckReport, Verdict, INTERIOR_MARGIN};
use crate::path::SampledPath;
use crate::vecops::{dist, join, norm};

/// Largest `d_R(t, u(t))` still counted as contained.
pub const CONTAINMENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verification {
    pub lambda: f64,
    /// `max_j ||(u_{j+1} - u_j)/h - λ(f_R(t_j, u_j) + f_R(t_{j+1}, u_{j+1}))/2||`.
    pub ode_residual: f64,
    /// Residual of the condition as posed (`cg`, `cg2`, `ci` or `cp`).
    pub bc_residual: f64,
    /// `||u(a) - P_D((Γu - r)/M)||` for increment conditions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projected_condition_residual: Option<f64>,
    /// `||Γu - Φ̃u||` and `||u(a) - Φ̃u||` when solved with `K`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_gamma_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_initial_residual: Option<f64>,
    pub containment_max_h: f64,
    pub containment_max_distance: f64,
    pub contained: bool,
    pub max_space_time_norm: f64,
    pub sup_norm: f64,
    pub c: f64,
    pub within_c: bool,
    /// Largest increase of `h(t, u(t))` over intervals reaching `h > 0`.
    pub h_increase_off_region: f64,
}

/// Residuals and containment of `u` (original coordinates) at homotopy level `lambda`.
pub fn verify_solution(
    spec: &ProblemSpec,
    u: &SampledPath,
    lambda: f64,
    operator: Option<Operator>,
) -> Result<Verification, SolveError> {
    let v = spec.to_internal(u);
    let grid = *spec.grid();
    let h = grid.step();
    let f = modified_field_path(spec, &v)?;
    let mut ode: f64 = 0.0;
    for j in 0..grid.intervals() {
        let (a, b) = (v.node(j), v.node(j + 1));
        let (fa, fb) = (f.node(j), f.node(j + 1));
        let d: Vec<f64> = (0..v.dim())
            .map(|i| (b[i] - a[i]) / h - 0.5 * lambda * (fa[i] + fb[i]))
            .collect();
        ode = ode.max(norm(&d));
    }

    // the encoded functional applied to v equals the original one applied to u
    let gv = spec.nodal().apply(&v);
    let m = spec.mass();
    let r = spec.r();
    let bc_residual = match spec.bc() {
        BcKind::Cg => {
            let d: Vec<f64> = (0..v.dim())
                .map(|i| gv[i] - m * v.first()[i] - r[i])
                .collect();
            norm(&d)
        }
        BcKind::Cg2 => dist(&gv, r),
        BcKind::Ci => dist(u.first(), r),
        BcKind::Cp => dist(u.first(), u.last()),
    };

    let projected_condition_residual =
        (spec.condition() == super::Condition::Increment).then(|| {
            let arg: Vec<f64> = gv.iter().zip(r).map(|(g, r)| (g - r) / m).collect();
            dist(v.first(), &spec.project_d(&arg))
        });
    let (k_gamma_residual, k_initial_residual) = if operator == Some(Operator::KTilde) {
        let target = phi_tilde(spec, &gv, v.first());
        (Some(dist(&gv, &target)), Some(dist(v.first(), &target)))
    } else {
        (None, None)
    };

    let pair = spec.pair();
    let region = pair.region();
    let mut max_h = f64::NEG_INFINITY;
    let mut max_d: f64 = 0.0;
    let mut hs = Vec::with_capacity(v.len());
    for (t, x) in v.iter() {
        let hv = pair.h(t, x).unwrap_or(f64::NAN);
        hs.push(hv);
        max_h = max_h.max(hv);
        max_d = max_d.max(region.distance(&join(t, x)));
    }
    let increase = hs
        .windows(2)
        .filter(|w| w[0].max(w[1]) > 0.0)
        .map(|w| w[1] - w[0])
        .fold(0.0_f64, f64::max);
    let max_st = u.iter().map(|(t, x)| norm(&join(t, x))).fold(0.0, f64::max);
    let c = spec.constants().c;
    Ok(Verification {
        lambda,
        ode_residual: ode,
        bc_residual,
        projected_condition_residual,
        k_gamma_residual,
        k_initial_residual,
        containment_max_h: max_h,
        containment_max_distance: max_d,
        contained: max_d <= CONTAINMENT_TOL,
        max_space_time_norm: max_st,
        sup_norm: u.sup_norm(),
        c,
        within_c: u.sup_norm() <= c + 1e-6,
        h_increase_off_region: increase,
    })
}

/// Strict confinement: every node at depth `≥ INTERIOR_MARGIN` inside `R`
/// with `h < 0`. Not applicable when `h ≥ 0` by construction.
pub fn interior_check(spec: &ProblemSpec, u: &SampledPath) -> CheckReport {
    let v = spec.to_internal(u);
    let pair = spec.pair();
    let region = pair.region();
    let mut values = BTreeMap::new();
    if pair.is_nonnegative() {
        return CheckReport {
            hypothesis: "interior".into(),
            verdict: Verdict::NotApplicable,
            worst: f64::NAN,
            witness: None,
            samples: v.len(),
            tolerance: 0.0,
            values,
            note: "not applicable (h >= 0)".into(),
        };
    }
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    let mut min_depth = f64::INFINITY;
    let mut argmin = 0.0;
    for (t, x) in v.iter() {
        let depth = region.boundary_depth(t, x);
        let hv = pair.h(t, x).unwrap_or(f64::NAN);
        if depth < min_depth {
            min_depth = depth;
            argmin = t;
        }
        let violation = (INTERIOR_MARGIN - depth).max(hv);
        if violation > worst || violation.is_nan() {
            worst = violation;
            let orig: Vec<f64> = if spec.reflected() {
                x.iter().map(|a| -a).collect()
            } else {
                x.to_vec()
            };
            witness = Some(join(t, &orig));
        }
    }
    values.insert("min_boundary_distance".into(), min_depth);
    values.insert("argmin_t".into(), argmin);
    let pass = worst <= 0.0;
    CheckReport {
        hypothesis: "interior".into(),
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        worst,
        witness,
        samples: v.len(),
        tolerance: 0.0,
        values,
        note: if pass {
            "every node is interior".into()
        } else {
            "node on or near the boundary".into()
        },
    }
}
