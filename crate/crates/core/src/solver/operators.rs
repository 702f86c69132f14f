//! The fixed-point operators on sampled paths. Integrals are running
//! trapezoid sums and `Θ` is the Fubini form of the nodal functional.

use super::{Operator, ProblemSpec, SolveError};
use crate::path::SampledPath;
use crate::vecops::project_ball;

/// `f_R(t_j, u(t_j))` at every node.
pub fn modified_field_path(spec: &ProblemSpec, u: &SampledPath) -> Result<SampledPath, SolveError> {
    let fr = spec.modified_field();
    let mut values = Vec::with_capacity(u.values().len());
    for (t, x) in u.iter() {
        values.extend(fr.eval(t, x)?);
    }
    Ok(SampledPath::from_values(*u.grid(), u.dim(), values)?)
}

/// Shared pieces of every operator: the running integral `∫_a^t f_R`, `Θu`
/// and `Γu`.
pub(crate) struct Pieces {
    pub integral: SampledPath,
    pub theta: Vec<f64>,
    pub gamma_u: Vec<f64>,
}

pub(crate) fn pieces(spec: &ProblemSpec, u: &SampledPath) -> Result<Pieces, SolveError> {
    let f = modified_field_path(spec, u)?;
    Ok(pieces_from_field(spec, u, &f))
}

pub(crate) fn pieces_from_field(spec: &ProblemSpec, u: &SampledPath, f: &SampledPath) -> Pieces {
    Pieces {
        integral: f.cumulative_trapezoid(),
        theta: spec.nodal().theta(f),
        gamma_u: spec.nodal().apply(u),
    }
}

/// `Φu = Γu - P_{MD}(Γu - r)`.
pub(crate) fn phi(spec: &ProblemSpec, gamma_u: &[f64]) -> Vec<f64> {
    let shifted: Vec<f64> = gamma_u.iter().zip(spec.r()).map(|(g, r)| g - r).collect();
    let radius = spec.mass() * spec.constants().c;
    let p = project_ball(&vec![0.0; shifted.len()], radius, &shifted);
    gamma_u.iter().zip(&p).map(|(g, p)| g - p).collect()
}

/// `Φ̃u = P_D((Γu + M u(a) - r) / M)`.
pub(crate) fn phi_tilde(spec: &ProblemSpec, gamma_u: &[f64], ua: &[f64]) -> Vec<f64> {
    let m = spec.mass();
    let arg: Vec<f64> = gamma_u
        .iter()
        .zip(ua.iter().zip(spec.r()))
        .map(|(g, (x, r))| (g + m * x - r) / m)
        .collect();
    spec.project_d(&arg)
}

/// Starting value of the `K'` image: `P_D((r - λΘ) / M)`.
pub(crate) fn projected_start(spec: &ProblemSpec, lambda: f64, theta: &[f64]) -> Vec<f64> {
    let m = spec.mass();
    let arg: Vec<f64> = spec
        .r()
        .iter()
        .zip(theta)
        .map(|(r, th)| (r - lambda * th) / m)
        .collect();
    spec.project_d(&arg)
}

fn assemble(
    u: &SampledPath,
    lambda: f64,
    integral: &SampledPath,
    offset: impl Fn(f64) -> Vec<f64>,
) -> SampledPath {
    let grid = *u.grid();
    let mut j = 0;
    SampledPath::from_fn(grid, u.dim(), |t| {
        let base = offset(t);
        let v = base
            .iter()
            .zip(integral.node(j))
            .map(|(b, i)| b + lambda * i)
            .collect();
        j += 1;
        v
    })
}

/// `J(λ, u) = u(a) + λ∫_a^t f_R - (1 + λ(t - a))(λΘu - Φu)`.
pub fn operator_j(
    spec: &ProblemSpec,
    lambda: f64,
    u: &SampledPath,
) -> Result<SampledPath, SolveError> {
    let p = pieces(spec, u)?;
    Ok(j_from_pieces(spec, lambda, u, &p))
}

pub(crate) fn j_from_pieces(
    spec: &ProblemSpec,
    lambda: f64,
    u: &SampledPath,
    p: &Pieces,
) -> SampledPath {
    let a = u.grid().a();
    let ua = u.first().to_vec();
    let defect: Vec<f64> = p
        .theta
        .iter()
        .zip(phi(spec, &p.gamma_u))
        .map(|(th, ph)| lambda * th - ph)
        .collect();
    assemble(u, lambda, &p.integral, |t| {
        let s = 1.0 + lambda * (t - a);
        ua.iter().zip(&defect).map(|(x, d)| x - s * d).collect()
    })
}

/// `K(λ, u) = M⁻¹(Φ̃u - λΘu) + λ∫_a^t f_R`.
pub fn operator_k_tilde(
    spec: &ProblemSpec,
    lambda: f64,
    u: &SampledPath,
) -> Result<SampledPath, SolveError> {
    let p = pieces(spec, u)?;
    Ok(k_tilde_from_pieces(spec, lambda, u, &p))
}

pub(crate) fn k_tilde_from_pieces(
    spec: &ProblemSpec,
    lambda: f64,
    u: &SampledPath,
    p: &Pieces,
) -> SampledPath {
    let m = spec.mass();
    let start: Vec<f64> = phi_tilde(spec, &p.gamma_u, u.first())
        .iter()
        .zip(&p.theta)
        .map(|(ph, th)| (ph - lambda * th) / m)
        .collect();
    assemble(u, lambda, &p.integral, |_| start.clone())
}

/// `K'(λ, u) = P_D((r - λΘu) / M) + λ∫_a^t f_R`.
pub fn operator_k_projected(
    spec: &ProblemSpec,
    lambda: f64,
    u: &SampledPath,
) -> Result<SampledPath, SolveError> {
    let p = pieces(spec, u)?;
    Ok(k_projected_from_pieces(spec, lambda, u, &p))
}

pub(crate) fn k_projected_from_pieces(
    spec: &ProblemSpec,
    lambda: f64,
    u: &SampledPath,
    p: &Pieces,
) -> SampledPath {
    let start = projected_start(spec, lambda, &p.theta);
    assemble(u, lambda, &p.integral, |_| start.clone())
}

pub fn apply_operator(
    spec: &ProblemSpec,
    which: Operator,
    lambda: f64,
    u: &SampledPath,
) -> Result<SampledPath, SolveError> {
    let p = pieces(spec, u)?;
    Ok(from_pieces(spec, which, lambda, u, &p))
}

pub(crate) fn from_pieces(
    spec: &ProblemSpec,
    which: Operator,
    lambda: f64,
    u: &SampledPath,
    p: &Pieces,
) -> SampledPath {
    match which {
        Operator::J => j_from_pieces(spec, lambda, u, p),
        Operator::KTilde => k_tilde_from_pieces(spec, lambda, u, p),
        Operator::KProjected => k_projected_from_pieces(spec, lambda, u, p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::VectorField;
    use crate::functionals::LinearFunctional;
    use crate::regions::{AdmissiblePair, Region};
    use crate::solver::BcKind;

    fn spec(field: &[&str], bc: BcKind, r: Vec<f64>) -> ProblemSpec {
        let region = Region::ball(0.0, 1.0, vec![0.0, 0.0, 0.0], 2.0).unwrap();
        let pair = AdmissiblePair::half_squared_distance(&region).unwrap();
        let f = VectorField::parse(field, 2).unwrap();
        let g = LinearFunctional::integral(0.0, 1.0);
        ProblemSpec::new(f, pair, bc, Some(g), r, 40).unwrap()
    }

    #[test]
    fn j_at_zero_is_constant() {
        let s = spec(
            &["-2*x1*exp(-x2)", "-x2*exp(-x1)"],
            BcKind::Cg,
            vec![0.3, -0.2],
        );
        let u = SampledPath::from_fn(*s.grid(), 2, |t| vec![t, 1.0 - t]);
        let out = operator_j(&s, 0.0, &u).unwrap();
        let gamma_u = s.nodal().apply(&u);
        let expected: Vec<f64> = u
            .first()
            .iter()
            .zip(phi(&s, &gamma_u))
            .map(|(a, b)| a + b)
            .collect();
        for (_, v) in out.iter() {
            assert_eq!(v, expected.as_slice());
        }
    }

    #[test]
    fn j_fixes_small_constants_when_r_vanishes() {
        let s = spec(
            &["-2*x1*exp(-x2)", "-x2*exp(-x1)"],
            BcKind::Cg,
            vec![0.0, 0.0],
        );
        let u = SampledPath::constant(*s.grid(), &[1.2, -2.5]);
        assert!(operator_j(&s, 0.0, &u).unwrap().sup_distance(&u) <= 1e-12);
    }

    #[test]
    fn k_variants_at_zero() {
        let s = spec(&["x2", "x1"], BcKind::Cg2, vec![5.0, 0.0]);
        let u = SampledPath::constant(*s.grid(), &[0.1, 0.2]);
        let kp = operator_k_projected(&s, 0.0, &u).unwrap();
        let expected = s.project_d(&[5.0, 0.0]);
        assert_eq!(kp.first(), expected.as_slice());
        assert_eq!(kp.last(), expected.as_slice());
        let k = operator_k_tilde(&s, 0.0, &u).unwrap();
        assert_eq!(k.first(), k.last());
    }
}
