//! λ-continuation with damped Picard iteration and a shooting Newton fallback.
//!
//! The fallback parametrises candidate paths by `x0 = u(a)`: an implicit
//! trapezoid march gives `u(t_j) = x0 + λ∫_a^{t_j} f_R` exactly in the
//! discrete sense, so the operator equation collapses to an `n`-dimensional
//! boundary equation in `x0`, solved by least-squares Newton steps.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::operators::{self, phi, phi_tilde, pieces_from_field, projected_start};
use super::verify::{verify_solution, Verification};
use super::{BcKind, Condition, Operator, ProblemSpec, SolveError, SolverOptions};
use crate::field::Constants;
use crate::hypotheses::{barrier_verdict, BarrierInstance, BarrierMode, BarrierVerdict};
use crate::path::SampledPath;
use crate::vecops::{dist, norm};

/// Slack on the a-priori bound `||u||₀ ≤ C`.
pub const BOUND_SLACK: f64 = 1e-6;
const THETA_MIN: f64 = 0.05;
const STAGNATION_WINDOW: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Picard,
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaStep {
    pub lambda: f64,
    pub method: Method,
    pub picard_iterations: usize,
    pub newton_iterations: usize,
    pub residual: f64,
    pub sup_norm: f64,
    pub within_bound: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub operator: Operator,
    pub bc: BcKind,
    pub condition: Condition,
    pub reflected: bool,
    pub intervals: usize,
    pub mass: f64,
    pub constants: Constants,
    pub converged: bool,
    pub lambda_reached: f64,
    pub lambda_trace: Vec<LambdaStep>,
    /// `||u - Op(λ, u)||₀` at the last converged λ.
    pub fixed_point_residual: f64,
    /// `||u||₀ ≤ C + 1e-6` held at every converged λ.
    pub apriori_bound_held: bool,
    pub verification: Option<Verification>,
    pub barrier: Option<BarrierVerdict>,
    pub warnings: Vec<String>,
    /// In the original coordinates.
    #[serde(skip)]
    pub solution: SampledPath,
    /// Converged iterates, one per accepted λ, in the original coordinates.
    #[serde(skip)]
    pub iterates: Vec<(f64, SampledPath)>,
}

struct Attempt {
    u: SampledPath,
    residual: f64,
    method: Method,
    picard_iterations: usize,
    newton_iterations: usize,
    converged: bool,
}

fn converged(options: &SolverOptions, residual: f64, u: &SampledPath) -> bool {
    residual <= options.tolerance || residual <= options.relative_tolerance * u.sup_norm()
}

/// Continuation over `options.schedule` with warm starts; a failed λ-step is
/// halved down to `options.min_lambda_step`.
pub fn solve_homotopy(
    spec: &ProblemSpec,
    which: Operator,
    options: &SolverOptions,
) -> Result<SolveReport, SolveError> {
    let n = spec.dim();
    let x_init = match &options.initial {
        Some(x) if x.len() == n => {
            if spec.reflected() {
                x.iter().map(|v| -v).collect()
            } else {
                x.clone()
            }
        }
        Some(x) => {
            return Err(SolveError::Dimension {
                what: "initial value",
                expected: n,
                got: x.len(),
            })
        }
        None => default_start(spec, which),
    };
    let mut u = SampledPath::constant(*spec.grid(), &x_init);
    let mut trace = Vec::new();
    let mut reached: Option<f64> = None;
    let mut residual = f64::NAN;
    let mut failed = false;
    let mut iterates = Vec::new();
    let bound = spec.constants().c + BOUND_SLACK;

    'schedule: for &target in &options.schedule {
        let mut lambda = target;
        loop {
            let attempt = solve_at(spec, which, lambda, &u, options)?;
            let sup = attempt.u.sup_norm();
            trace.push(LambdaStep {
                lambda,
                method: attempt.method,
                picard_iterations: attempt.picard_iterations,
                newton_iterations: attempt.newton_iterations,
                residual: attempt.residual,
                sup_norm: sup,
                within_bound: sup <= bound,
                converged: attempt.converged,
            });
            if attempt.converged {
                u = attempt.u;
                residual = attempt.residual;
                reached = Some(lambda);
                iterates.push((lambda, spec.to_internal(&u)));
                if lambda == target {
                    break;
                }
                lambda = target;
                continue;
            }
            let Some(prev) = reached else {
                failed = true;
                break 'schedule;
            };
            let step = 0.5 * (lambda - prev);
            if step < options.min_lambda_step {
                failed = true;
                break 'schedule;
            }
            lambda = prev + step;
        }
    }

    let converged_all = !failed && reached.is_some();
    let apriori = trace.iter().filter(|s| s.converged).all(|s| s.within_bound);
    let solution = spec.to_internal(&u);
    let (verification, barrier) = match reached {
        Some(lambda) if converged_all => {
            let v = verify_solution(spec, &solution, lambda, Some(which))?;
            let w = SampledPath::from_values(*spec.grid(), 1, h_along(spec, &u))?;
            let mode = if w.first()[0] <= 0.0 {
                BarrierMode::Initial
            } else {
                BarrierMode::Periodic
            };
            (
                Some(v),
                Some(barrier_verdict(&BarrierInstance { w, z: 0.0, mode })),
            )
        }
        _ => (None, None),
    };
    Ok(SolveReport {
        operator: which,
        bc: spec.bc(),
        condition: spec.condition(),
        reflected: spec.reflected(),
        intervals: spec.grid().intervals(),
        mass: spec.mass(),
        constants: *spec.constants(),
        converged: converged_all,
        lambda_reached: reached.unwrap_or(f64::NAN),
        lambda_trace: trace,
        fixed_point_residual: residual,
        apriori_bound_held: apriori,
        verification,
        barrier,
        warnings: spec.warnings().to_vec(),
        solution,
        iterates,
    })
}

/// The `λ = 0` fixed point: `-C r/|r|` for `J` (any `||x|| ≤ C` when
/// `r = 0`), `P_D(r/M)` for the `K` operators.
fn default_start(spec: &ProblemSpec, which: Operator) -> Vec<f64> {
    let r = spec.r();
    let size = norm(r);
    if which == Operator::J {
        if size == 0.0 {
            return vec![0.0; r.len()];
        }
        let c = spec.constants().c;
        return r.iter().map(|v| -c * v / size).collect();
    }
    spec.project_d(&r.iter().map(|v| v / spec.mass()).collect::<Vec<_>>())
}

/// `h(t_j, u(t_j))` in internal coordinates.
fn h_along(spec: &ProblemSpec, u: &SampledPath) -> Vec<f64> {
    u.iter()
        .map(|(t, x)| spec.pair().h(t, x).unwrap_or(f64::NAN))
        .collect()
}

fn solve_at(
    spec: &ProblemSpec,
    which: Operator,
    lambda: f64,
    warm: &SampledPath,
    options: &SolverOptions,
) -> Result<Attempt, SolveError> {
    let picard = picard(spec, which, lambda, warm, options)?;
    if picard.converged {
        return Ok(picard);
    }
    let start = if picard.residual.is_finite() {
        picard.u.first().to_vec()
    } else {
        warm.first().to_vec()
    };
    let mut newton = shooting_newton(spec, which, lambda, &start, options)?;
    newton.picard_iterations = picard.picard_iterations;
    if !newton.converged && picard.residual < newton.residual {
        return Ok(Attempt {
            newton_iterations: newton.newton_iterations,
            ..picard
        });
    }
    Ok(newton)
}

fn picard(
    spec: &ProblemSpec,
    which: Operator,
    lambda: f64,
    warm: &SampledPath,
    options: &SolverOptions,
) -> Result<Attempt, SolveError> {
    let mut u = warm.clone();
    let mut image = operators::apply_operator(spec, which, lambda, &u)?;
    let mut residual = u.sup_distance(&image);
    let mut theta: f64 = 1.0;
    let mut best = residual;
    let mut since_best = 0;
    let mut iterations = 0;
    while iterations < options.max_picard && !converged(options, residual, &u) {
        iterations += 1;
        let candidate = u.combine(1.0 - theta, &image, theta);
        let cand_image = operators::apply_operator(spec, which, lambda, &candidate)?;
        let cand_residual = candidate.sup_distance(&cand_image);
        if cand_residual.is_finite() && cand_residual <= residual {
            u = candidate;
            image = cand_image;
            residual = cand_residual;
        } else {
            theta *= 0.5;
            if theta < THETA_MIN {
                break;
            }
        }
        if residual < 0.9 * best {
            best = residual;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= STAGNATION_WINDOW {
                break;
            }
        }
    }
    let ok = converged(options, residual, &u);
    Ok(Attempt {
        u,
        residual,
        method: Method::Picard,
        picard_iterations: iterations,
        newton_iterations: 0,
        converged: ok,
    })
}

/// Implicit trapezoid march `u_{j+1} = u_j + λh/2 (f_R(t_j, u_j) + f_R(t_{j+1}, u_{j+1}))`.
fn march(
    spec: &ProblemSpec,
    lambda: f64,
    x0: &[f64],
) -> Result<(SampledPath, SampledPath), SolveError> {
    let grid = *spec.grid();
    let fr = spec.modified_field();
    let n = x0.len();
    let half = 0.5 * lambda * grid.step();
    let mut u = Vec::with_capacity(grid.len() * n);
    let mut f = Vec::with_capacity(grid.len() * n);
    u.extend_from_slice(x0);
    f.extend(fr.eval(grid.node(0), x0)?);
    for j in 0..grid.intervals() {
        let t1 = grid.node(j + 1);
        let uj = u[j * n..(j + 1) * n].to_vec();
        let fj = f[j * n..(j + 1) * n].to_vec();
        let base: Vec<f64> = uj.iter().zip(&fj).map(|(x, v)| x + half * v).collect();
        let mut y: Vec<f64> = uj
            .iter()
            .zip(&fj)
            .map(|(x, v)| x + 2.0 * half * v)
            .collect();
        let mut fy = fr.eval(t1, &y)?;
        let mut done = false;
        for _ in 0..100 {
            let next: Vec<f64> = base.iter().zip(&fy).map(|(b, v)| b + half * v).collect();
            let change = dist(&next, &y);
            y = next;
            fy = fr.eval(t1, &y)?;
            if change <= 1e-15 * (1.0 + norm(&y)) {
                done = true;
                break;
            }
        }
        if !done {
            // non-contractive step: Newton on y - base - half f_R(t1, y)
            for _ in 0..30 {
                let g: Vec<f64> = (0..n).map(|i| y[i] - base[i] - half * fy[i]).collect();
                if norm(&g) <= 1e-14 * (1.0 + norm(&y)) {
                    break;
                }
                let mut jac = DMatrix::<f64>::identity(n, n);
                for k in 0..n {
                    let step = 1e-7 * (1.0 + y[k].abs());
                    let mut yk = y.clone();
                    yk[k] += step;
                    let fk = fr.eval(t1, &yk)?;
                    for i in 0..n {
                        jac[(i, k)] -= half * (fk[i] - fy[i]) / step;
                    }
                }
                let rhs = DVector::from_iterator(n, g.iter().map(|v| -v));
                let Some(delta) = jac.lu().solve(&rhs) else {
                    break;
                };
                y.iter_mut().zip(delta.iter()).for_each(|(a, d)| *a += d);
                fy = fr.eval(t1, &y)?;
            }
        }
        u.extend_from_slice(&y);
        f.extend(fy);
    }
    Ok((
        SampledPath::from_values(grid, n, u)?,
        SampledPath::from_values(grid, n, f)?,
    ))
}

/// Residual of the operator equation at `t = a` for a marched path.
fn boundary_residual(
    spec: &ProblemSpec,
    which: Operator,
    lambda: f64,
    u: &SampledPath,
    f: &SampledPath,
) -> Vec<f64> {
    let p = pieces_from_field(spec, u, f);
    let x0 = u.first();
    match which {
        Operator::J => p
            .theta
            .iter()
            .zip(phi(spec, &p.gamma_u))
            .map(|(th, ph)| lambda * th - ph)
            .collect(),
        Operator::KTilde => {
            let m = spec.mass();
            let target = phi_tilde(spec, &p.gamma_u, x0);
            x0.iter()
                .zip(target.iter().zip(&p.theta))
                .map(|(x, (ph, th))| x - (ph - lambda * th) / m)
                .collect()
        }
        Operator::KProjected => {
            let target = projected_start(spec, lambda, &p.theta);
            x0.iter().zip(&target).map(|(x, y)| x - y).collect()
        }
    }
}

fn shooting_newton(
    spec: &ProblemSpec,
    which: Operator,
    lambda: f64,
    start: &[f64],
    options: &SolverOptions,
) -> Result<Attempt, SolveError> {
    let n = start.len();
    let eval = |x: &[f64]| -> Result<(Vec<f64>, SampledPath), SolveError> {
        let (u, f) = march(spec, lambda, x)?;
        Ok((boundary_residual(spec, which, lambda, &u, &f), u))
    };
    let mut x = start.to_vec();
    let (mut b, mut u) = eval(&x)?;
    let mut iterations = 0;
    while iterations < options.max_newton {
        let size = norm(&b);
        if !size.is_finite() || size <= 1e-13 * (1.0 + norm(&x)) {
            break;
        }
        iterations += 1;
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            let step = 1e-7 * (1.0 + x[k].abs());
            let mut xk = x.clone();
            xk[k] += step;
            let (bk, _) = eval(&xk)?;
            for i in 0..n {
                jac[(i, k)] = (bk[i] - b[i]) / step;
            }
        }
        let rhs = DVector::from_iterator(n, b.iter().map(|v| -v));
        let svd = jac.svd(true, true);
        let cutoff = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
        let Ok(delta) = svd.solve(&rhs, cutoff) else {
            break;
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha >= 1e-6 {
            let trial: Vec<f64> = x
                .iter()
                .zip(delta.iter())
                .map(|(a, d)| a + alpha * d)
                .collect();
            let (bt, ut) = eval(&trial)?;
            if norm(&bt) < (1.0 - 1e-4 * alpha) * size {
                x = trial;
                b = bt;
                u = ut;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let image = operators::apply_operator(spec, which, lambda, &u)?;
    let residual = u.sup_distance(&image);
    let ok = converged(options, residual, &u);
    Ok(Attempt {
        u,
        residual,
        method: Method::Newton,
        picard_iterations: 0,
        newton_iterations: iterations,
        converged: ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::VectorField;
    use crate::functionals::LinearFunctional;
    use crate::regions::{AdmissiblePair, Region};

    fn ball_pair(n: usize) -> AdmissiblePair {
        let region = Region::ball(0.0, 1.0, vec![0.0; n + 1], 2.0).unwrap();
        AdmissiblePair::half_squared_distance(&region).unwrap()
    }

    #[test]
    fn zero_field_initial_condition_gives_constant() {
        let f = VectorField::parse(&["0", "0"], 2).unwrap();
        let spec =
            ProblemSpec::new(f, ball_pair(2), BcKind::Ci, None, vec![0.5, -0.25], 50).unwrap();
        let report =
            solve_homotopy(&spec, Operator::KProjected, &SolverOptions::default()).unwrap();
        assert!(report.converged);
        for (_, x) in report.solution.iter() {
            assert!(dist(x, &[0.5, -0.25]) < 1e-12);
        }
    }

    #[test]
    fn linear_periodic_problem_has_zero_solution() {
        let f = VectorField::parse(&["-x1"], 1).unwrap();
        let spec = ProblemSpec::new(f, ball_pair(1), BcKind::Cp, None, vec![0.0], 50).unwrap();
        let report = solve_homotopy(&spec, Operator::J, &SolverOptions::default()).unwrap();
        assert!(report.converged, "{:?}", report.lambda_trace);
        assert!(report.solution.sup_norm() < 1e-8);
    }

    #[test]
    fn example_solution_stays_in_the_ball() {
        let f = VectorField::parse(&["-2*x1*exp(-x2)", "-x2*exp(-x1)"], 2).unwrap();
        let g = LinearFunctional::integral(0.0, 1.0);
        let spec =
            ProblemSpec::new(f, ball_pair(2), BcKind::Cg2, Some(g), vec![1.0, 1.0], 100).unwrap();
        let report =
            solve_homotopy(&spec, Operator::KProjected, &SolverOptions::default()).unwrap();
        assert!(report.converged, "{:?}", report.lambda_trace);
        assert!(report.apriori_bound_held);
        let v = report.verification.unwrap();
        assert!(v.max_space_time_norm <= 2.0 + 1e-6);
        assert!(v.bc_residual < 1e-8);
    }

    #[test]
    fn negative_mass_round_trip() {
        // Γu = -u(b) = -r, f = 1: u(t) = u(b) - (1 - t)
        let f = VectorField::parse(&["1"], 1).unwrap();
        let g = LinearFunctional::new(
            0.0,
            1.0,
            vec![crate::functionals::Atom {
                at: 1.0,
                weight: -1.0,
            }],
            None,
        )
        .unwrap();
        let spec = ProblemSpec::new(f, ball_pair(1), BcKind::Cg2, Some(g), vec![-0.5], 20).unwrap();
        let report =
            solve_homotopy(&spec, Operator::KProjected, &SolverOptions::default()).unwrap();
        assert!(report.converged);
        assert!((report.solution.last()[0] - 0.5).abs() < 1e-10);
        assert!((report.solution.first()[0] + 0.5).abs() < 1e-10);
    }
}
