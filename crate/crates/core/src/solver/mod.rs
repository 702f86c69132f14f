//! Homotopy solution of `u' = f(t, u)` under linear boundary conditions,
//! through the fixed points of the integral operators `J`, `K` and `K'`.

mod homotopy;
mod operators;
mod verify;

pub use homotopy::{solve_homotopy, LambdaStep, Method, SolveReport};
pub use operators::{
    apply_operator, modified_field_path, operator_j, operator_k_projected, operator_k_tilde,
};
pub use verify::{interior_check, verify_solution, Verification};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Constants, FieldError, ModifiedField, VectorField};
use crate::functionals::{FunctionalError, LinearFunctional, NodalFunctional, DEGENERATE_MASS};
use crate::path::{Grid, GridError, SampledPath};
use crate::regions::AdmissiblePair;
use crate::vecops::project_ball;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("{what}: expected {expected} components, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("boundary condition: {0}")]
    BoundaryCondition(String),
    #[error("pair and functional live on different intervals")]
    IntervalMismatch,
}

/// Boundary conditions: `cg` is `Γ(u - u(a)) = r`, `cg2` is `Γu = r`, `ci` is
/// `u(a) = r` and `cp` is `u(a) = u(b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcKind {
    Cg,
    Cg2,
    Ci,
    Cp,
}

/// The form a condition takes after encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `Γ(u - u(a)) = r`
    Increment,
    /// `Γu = r`
    Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Operator {
    J,
    #[serde(rename = "K")]
    KTilde,
    #[serde(rename = "Kp")]
    KProjected,
}

impl Operator {
    /// `J` for increment conditions, `K'` for value conditions.
    pub fn default_for(condition: Condition) -> Operator {
        match condition {
            Condition::Increment => Operator::J,
            Condition::Value => Operator::KProjected,
        }
    }

    pub fn parse(name: &str) -> Option<Operator> {
        match name {
            "J" => Some(Operator::J),
            "K" => Some(Operator::KTilde),
            "Kp" => Some(Operator::KProjected),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverOptions {
    pub intervals: usize,
    pub schedule: Vec<f64>,
    pub tolerance: f64,
    pub relative_tolerance: f64,
    pub max_picard: usize,
    pub max_newton: usize,
    pub min_lambda_step: f64,
    /// Starting value of `u(a)`; defaults to a fixed point at `λ = 0`.
    pub initial: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            intervals: 400,
            schedule: (0..=10).map(|k| k as f64 / 10.0).collect(),
            tolerance: 1e-8,
            relative_tolerance: 1e-10,
            max_picard: 300,
            max_newton: 60,
            min_lambda_step: 1e-3,
            initial: None,
        }
    }
}

/// A problem ready for the operators: encoded condition, `M > 0`, the grid,
/// `f_R` and the constants.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    bc: BcKind,
    condition: Condition,
    reflected: bool,
    functional: LinearFunctional,
    nodal: NodalFunctional,
    mass: f64,
    r: Vec<f64>,
    modified: ModifiedField,
    constants: Constants,
    warnings: Vec<String>,
}

impl ProblemSpec {
    /// `functional` is required for `cg` and `cg2` and ignored otherwise; `r`
    /// must vanish for `cp`. Negative-mass functionals are reflected.
    pub fn new(
        field: VectorField,
        pair: AdmissiblePair,
        bc: BcKind,
        functional: Option<LinearFunctional>,
        r: Vec<f64>,
        intervals: usize,
    ) -> Result<Self, SolveError> {
        let (grid, field, pair, functional, condition, r, reflected, warnings) =
            encode(field, pair, bc, functional, r, intervals)?;
        let modified = ModifiedField::new(field, pair, grid)?;
        Self::assemble(bc, condition, reflected, functional, r, modified, warnings)
    }

    /// As [`Self::new`] with a prescribed damping `c(t_j)`.
    pub fn with_damping(
        field: VectorField,
        pair: AdmissiblePair,
        bc: BcKind,
        functional: Option<LinearFunctional>,
        r: Vec<f64>,
        intervals: usize,
        damping: Vec<f64>,
    ) -> Result<Self, SolveError> {
        let (grid, field, pair, functional, condition, r, reflected, warnings) =
            encode(field, pair, bc, functional, r, intervals)?;
        let modified = ModifiedField::with_damping(field, pair, grid, damping);
        Self::assemble(bc, condition, reflected, functional, r, modified, warnings)
    }

    fn assemble(
        bc: BcKind,
        condition: Condition,
        reflected: bool,
        functional: LinearFunctional,
        r: Vec<f64>,
        modified: ModifiedField,
        mut warnings: Vec<String>,
    ) -> Result<Self, SolveError> {
        let grid = *modified.grid();
        let nodal = functional.on_grid(&grid)?;
        let mass = nodal.mass()?;
        let min_g = functional.min_cumulative_weight(&grid)?;
        if min_g < -1e-12 {
            warnings.push(format!("functional is not positive: min g = {min_g:e}"));
        }
        let constants = Constants::new(modified.pair());
        Ok(ProblemSpec {
            bc,
            condition,
            reflected,
            functional,
            nodal,
            mass,
            r,
            modified,
            constants,
            warnings,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.modified.grid()
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    pub fn bc(&self) -> BcKind {
        self.bc
    }

    pub fn condition(&self) -> Condition {
        self.condition
    }

    /// Whether the problem is solved for `v = -u`.
    pub fn reflected(&self) -> bool {
        self.reflected
    }

    pub fn functional(&self) -> &LinearFunctional {
        &self.functional
    }

    pub fn nodal(&self) -> &NodalFunctional {
        &self.nodal
    }

    /// `M = Γ(1) > 0` of the encoded functional.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn modified_field(&self) -> &ModifiedField {
        &self.modified
    }

    pub fn pair(&self) -> &AdmissiblePair {
        self.modified.pair()
    }

    pub fn constants(&self) -> &Constants {
        &self.constants
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `P_D(x)` with `D = B[0, C]`.
    pub fn project_d(&self, x: &[f64]) -> Vec<f64> {
        project_ball(&vec![0.0; x.len()], self.constants.c, x)
    }

    /// Maps a path between the original and the internal (possibly reflected)
    /// coordinates; the map is an involution.
    pub fn to_internal(&self, u: &SampledPath) -> SampledPath {
        if self.reflected {
            u.negated()
        } else {
            u.clone()
        }
    }
}

type Encoded = (
    Grid,
    VectorField,
    AdmissiblePair,
    LinearFunctional,
    Condition,
    Vec<f64>,
    bool,
    Vec<String>,
);

fn encode(
    field: VectorField,
    pair: AdmissiblePair,
    bc: BcKind,
    functional: Option<LinearFunctional>,
    r: Vec<f64>,
    intervals: usize,
) -> Result<Encoded, SolveError> {
    let n = pair.region().dim();
    if field.dim() != n {
        return Err(SolveError::Dimension {
            what: "field",
            expected: n,
            got: field.dim(),
        });
    }
    if r.len() != n {
        return Err(SolveError::Dimension {
            what: "r",
            expected: n,
            got: r.len(),
        });
    }
    let (a, b) = pair.region().interval();
    let grid = Grid::new(a, b, intervals)?;
    let mut warnings = Vec::new();
    let (functional, condition, r) = match bc {
        BcKind::Cg | BcKind::Cg2 => {
            let g = functional
                .ok_or_else(|| SolveError::BoundaryCondition("a functional is required".into()))?;
            if g.interval() != (a, b) {
                return Err(SolveError::IntervalMismatch);
            }
            (
                g,
                if bc == BcKind::Cg {
                    Condition::Increment
                } else {
                    Condition::Value
                },
                r,
            )
        }
        BcKind::Ci => {
            if functional.is_some() {
                warnings.push("functional ignored for an initial condition".into());
            }
            (
                LinearFunctional::point_evaluation(a, b, a)?,
                Condition::Value,
                r,
            )
        }
        BcKind::Cp => {
            if functional.is_some() {
                warnings.push("functional ignored for a periodic condition".into());
            }
            if r.iter().any(|v| *v != 0.0) {
                return Err(SolveError::BoundaryCondition(
                    "r must vanish for a periodic condition".into(),
                ));
            }
            (
                LinearFunctional::point_evaluation(a, b, b)?,
                Condition::Increment,
                r,
            )
        }
    };
    let mass = functional.mass(&grid)?;
    if mass.abs() < DEGENERATE_MASS {
        return Err(FunctionalError::DegenerateMass(mass).into());
    }
    if mass < 0.0 {
        warnings.push("negative mass: solving for v = -u".into());
        return Ok((
            grid,
            field.reflected(),
            pair.mirrored(),
            functional.negated(),
            condition,
            r,
            true,
            warnings,
        ));
    }
    Ok((grid, field, pair, functional, condition, r, false, warnings))
}
