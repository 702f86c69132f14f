//! The right-hand side `f`, its retracted and damped modification `f_R`,
//! and the constants of the a-priori bound.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, Expression};
use crate::hypotheses::sampling::Halton;
use crate::path::Grid;
use crate::regions::{AdmissiblePair, PairError};
use crate::vecops::{norm, project_ball};

/// Points per grid node used to bound `||f(p(t, ·))||`.
pub const C_SAMPLES: usize = 2000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("field component {component} at t = {t}, x = {x:?}: {source}")]
    Eval {
        component: usize,
        t: f64,
        x: Vec<f64>,
        source: EvalError,
    },
    #[error("field has {got} components, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Pair(#[from] PairError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum VectorField {
    Components(Vec<Expression>),
    /// `f̃(t, x) = -f(t, -x)`.
    Reflected(Box<VectorField>),
}

impl VectorField {
    pub fn new(components: Vec<Expression>, n: usize) -> Result<Self, FieldError> {
        if components.len() != n {
            return Err(FieldError::Dimension {
                expected: n,
                got: components.len(),
            });
        }
        if let Some(e) = components.iter().find(|e| e.dim() != n) {
            return Err(FieldError::Dimension {
                expected: n,
                got: e.dim(),
            });
        }
        Ok(VectorField::Components(components))
    }

    pub fn parse(texts: &[&str], n: usize) -> Result<Self, crate::expr::ParseError> {
        let components = texts
            .iter()
            .map(|t| Expression::parse(t, n))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(VectorField::Components(components))
    }

    pub fn dim(&self) -> usize {
        match self {
            VectorField::Components(c) => c.len(),
            VectorField::Reflected(f) => f.dim(),
        }
    }

    pub fn reflected(&self) -> VectorField {
        match self {
            VectorField::Reflected(inner) => (**inner).clone(),
            other => VectorField::Reflected(Box::new(other.clone())),
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        match self {
            VectorField::Components(c) => c
                .iter()
                .enumerate()
                .map(|(component, e)| {
                    e.eval(t, x).map_err(|source| FieldError::Eval {
                        component,
                        t,
                        x: x.to_vec(),
                        source,
                    })
                })
                .collect(),
            VectorField::Reflected(f) => {
                let minus: Vec<f64> = x.iter().map(|v| -v).collect();
                Ok(f.eval(t, &minus)?.into_iter().map(|v| -v).collect())
            }
        }
    }
}

/// `m`, `C = max{m, 1 + ||p₂||₀}`, `K = C + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    pub m: f64,
    pub p2_bound: f64,
    /// Radius of `D = B[0, C]`.
    pub c: f64,
    /// Radius of `E = B(0, K)` and of the path set `{||u||₀ < K}`.
    pub k: f64,
    pub working_radius: f64,
}

impl Constants {
    pub fn new(pair: &AdmissiblePair) -> Self {
        let m = pair.region().state_bound();
        let p2_bound = pair.p2_bound();
        let c = m.max(1.0 + p2_bound);
        Constants {
            m,
            p2_bound,
            c,
            k: c + 1.0,
            working_radius: pair.working_radius(),
        }
    }
}

/// `c(t_j) = 1.1 max_x ||f(p(t_j, x))|| + 1` over deterministic samples of the
/// working ball.
pub fn bound_c(
    field: &VectorField,
    pair: &AdmissiblePair,
    grid: &Grid,
) -> Result<Vec<f64>, FieldError> {
    let n = field.dim();
    let radius = pair.working_radius();
    let mut halton = Halton::new(n, 17);
    let mut xs: Vec<Vec<f64>> = (0..C_SAMPLES)
        .map(|_| {
            let u = halton.next_point();
            let v: Vec<f64> = u.iter().map(|s| radius * (2.0 * s - 1.0)).collect();
            project_ball(&vec![0.0; n], radius, &v)
        })
        .collect();
    xs.push(vec![0.0; n]);
    let nodes: Vec<f64> = grid.nodes().collect();
    nodes
        .par_iter()
        .map(|&t| {
            let mut sup: f64 = 0.0;
            for x in &xs {
                let e = pair.eval(t, x)?;
                let v = field.eval(e.p1, &e.p2)?;
                sup = sup.max(norm(&v));
            }
            Ok(1.1 * sup + 1.0)
        })
        .collect()
}

/// `f_R(t, x) = f(t, x)` on `R`, `f(p(t, x)) + c(t)(p₂(t, x) - x)` off `R`.
#[derive(Debug, Clone)]
pub struct ModifiedField {
    field: VectorField,
    pair: AdmissiblePair,
    grid: Grid,
    c: Vec<f64>,
}

impl ModifiedField {
    pub fn new(field: VectorField, pair: AdmissiblePair, grid: Grid) -> Result<Self, FieldError> {
        let c = bound_c(&field, &pair, &grid)?;
        Ok(ModifiedField {
            field,
            pair,
            grid,
            c,
        })
    }

    pub fn with_damping(field: VectorField, pair: AdmissiblePair, grid: Grid, c: Vec<f64>) -> Self {
        assert_eq!(c.len(), grid.len());
        ModifiedField {
            field,
            pair,
            grid,
            c,
        }
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn pair(&self) -> &AdmissiblePair {
        &self.pair
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn damping(&self) -> &[f64] {
        &self.c
    }

    /// `c` is piecewise constant, taking the value of the left node.
    pub fn damping_at(&self, t: f64) -> f64 {
        let (j, theta) = self.grid.locate(t);
        if theta >= 1.0 {
            self.c[j + 1]
        } else {
            self.c[j]
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        let e = self.pair.eval(t, x)?;
        if e.h <= 0.0 {
            return self.field.eval(t, x);
        }
        let c = self.damping_at(t);
        let fp = self.field.eval(e.p1, &e.p2)?;
        Ok(fp
            .iter()
            .zip(e.p2.iter().zip(x))
            .map(|(f, (p, x))| f + c * (p - x))
            .collect())
    }
}

/// `αP_D(x)` and `P_{αD}(αx)` for `D = B[0, radius]`, computed independently.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledProjection {
    pub projection: Vec<f64>,
    pub scaled: Vec<f64>,
    pub of_scaled: Vec<f64>,
}

impl ScaledProjection {
    pub fn discrepancy(&self) -> f64 {
        crate::vecops::dist(&self.scaled, &self.of_scaled)
    }
}

pub fn scaled_projection(radius: f64, alpha: f64, x: &[f64]) -> ScaledProjection {
    assert!(alpha >= 0.0, "scale must be nonnegative");
    let projection = project_ball(&vec![0.0; x.len()], radius, x);
    let scaled = projection.iter().map(|v| alpha * v).collect();
    let ax: Vec<f64> = x.iter().map(|v| alpha * v).collect();
    let nx = norm(&ax);
    let of_scaled = if nx <= alpha * radius {
        ax
    } else {
        ax.iter().map(|v| v * (alpha * radius / nx)).collect()
    };
    ScaledProjection {
        projection,
        scaled,
        of_scaled,
    }
}
