//! Linear boundary functionals `Γu = Σ w_i u(s_i) + ∫ ρ(s) u(s) ds`.
//!
//! A [`LinearFunctional`] is the continuous description. Everything that acts
//! on sampled paths goes through a [`NodalFunctional`], the same functional
//! pushed onto a grid: atoms are split between their two neighbouring nodes by
//! linear interpolation and the density enters with trapezoid weights. The
//! discrete operator is therefore exactly linear in the path.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Expression};
use crate::path::{Grid, SampledPath};

/// Below this, `Γ(1)` is treated as zero.
pub const DEGENERATE_MASS: f64 = 1e-12;

const SIMPSON_PANELS: usize = 512;
const SIGN_GRID_INTERVALS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FunctionalError {
    #[error("atom at {at} lies outside [{a}, {b}]")]
    AtomOutside { at: f64, a: f64, b: f64 },
    #[error("atom locations must be strictly increasing ({prev} then {next})")]
    AtomsNotIncreasing { prev: f64, next: f64 },
    #[error("degenerate functional: Γ(1) = {0:e}")]
    DegenerateMass(f64),
    #[error("path interval [{pa}, {pb}] does not match functional interval [{a}, {b}]")]
    IntervalMismatch { a: f64, b: f64, pa: f64, pb: f64 },
    #[error("density: {0}")]
    Density(#[from] EvalError),
    #[error("reflection needs Γ(1) < 0, got {0}")]
    PositiveMass(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub at: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFunctional {
    a: f64,
    b: f64,
    atoms: Vec<Atom>,
    density: Option<Expression>,
    negated_density: bool,
}

impl LinearFunctional {
    /// The density is a univariate expression in the integration variable.
    pub fn new(
        a: f64,
        b: f64,
        atoms: Vec<Atom>,
        density: Option<Expression>,
    ) -> Result<Self, FunctionalError> {
        for atom in &atoms {
            if !(a..=b).contains(&atom.at) {
                return Err(FunctionalError::AtomOutside { at: atom.at, a, b });
            }
        }
        for pair in atoms.windows(2) {
            if pair[1].at <= pair[0].at {
                return Err(FunctionalError::AtomsNotIncreasing {
                    prev: pair[0].at,
                    next: pair[1].at,
                });
            }
        }
        let g = LinearFunctional {
            a,
            b,
            atoms,
            density,
            negated_density: false,
        };
        if g.density.is_some() {
            // Reject densities that cannot be evaluated on the interval up front.
            let grid = Grid::new(a, b, 64).expect("valid interval");
            for s in grid.nodes() {
                g.density_at(s)?;
            }
        }
        Ok(g)
    }

    /// `Γu = u(s)`.
    pub fn point_evaluation(a: f64, b: f64, s: f64) -> Result<Self, FunctionalError> {
        Self::new(a, b, vec![Atom { at: s, weight: 1.0 }], None)
    }

    /// `Γu = ∫_a^b u`.
    pub fn integral(a: f64, b: f64) -> Self {
        Self::new(a, b, Vec::new(), Some(Expression::constant(1.0))).expect("constant density")
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&Expression> {
        self.density.as_ref()
    }

    pub fn density_at(&self, s: f64) -> Result<f64, FunctionalError> {
        match &self.density {
            None => Ok(0.0),
            Some(rho) => {
                let v = rho.eval(s, &[])?;
                Ok(if self.negated_density { -v } else { v })
            }
        }
    }

    /// Pushes the functional onto `grid`.
    pub fn on_grid(&self, grid: &Grid) -> Result<NodalFunctional, FunctionalError> {
        if grid.a() != self.a || grid.b() != self.b {
            return Err(FunctionalError::IntervalMismatch {
                a: self.a,
                b: self.b,
                pa: grid.a(),
                pb: grid.b(),
            });
        }
        let h = grid.step();
        let mut density_weights = vec![0.0; grid.len()];
        if self.density.is_some() {
            for (j, s) in grid.nodes().enumerate() {
                let end = j == 0 || j == grid.intervals();
                density_weights[j] = if end { 0.5 * h } else { h } * self.density_at(s)?;
            }
        }
        let mut weights = density_weights.clone();
        for atom in &self.atoms {
            let (j, theta) = grid.locate(atom.at);
            weights[j] += atom.weight * (1.0 - theta);
            weights[j + 1] += atom.weight * theta;
        }
        Ok(NodalFunctional {
            grid: *grid,
            weights,
            density_weights,
            atoms: self.atoms.clone(),
        })
    }

    /// `M = Γ(1)` with the density integrated by the trapezoid rule on `grid`.
    pub fn mass(&self, grid: &Grid) -> Result<f64, FunctionalError> {
        self.on_grid(grid)?.mass()
    }

    /// `Γu` for a sampled path (componentwise).
    pub fn apply(&self, u: &SampledPath) -> Result<Vec<f64>, FunctionalError> {
        Ok(self.on_grid(u.grid())?.apply(u))
    }

    /// `g(s) = Γ(t ↦ χ_[a,t](s)) = Σ_{s_i ≥ s} w_i + ∫_s^b ρ`.
    pub fn cumulative_weight(&self, s: f64) -> Result<f64, FunctionalError> {
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|atom| atom.at >= s)
            .map(|atom| atom.weight)
            .sum();
        Ok(atoms + self.density_integral(s, self.b)?)
    }

    /// Smallest `g(t_j)` over the nodes; negative values mean the functional is
    /// not positive and the cumulative weight loses its sign.
    pub fn min_cumulative_weight(&self, grid: &Grid) -> Result<f64, FunctionalError> {
        let mut min = f64::INFINITY;
        for s in grid.nodes() {
            min = min.min(self.cumulative_weight(s)?);
        }
        Ok(min)
    }

    fn density_integral(&self, lo: f64, hi: f64) -> Result<f64, FunctionalError> {
        if self.density.is_none() || hi <= lo {
            return Ok(0.0);
        }
        let n = SIMPSON_PANELS;
        let h = (hi - lo) / n as f64;
        let mut acc = self.density_at(lo)? + self.density_at(hi)?;
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * self.density_at(lo + i as f64 * h)?;
        }
        Ok(acc * h / 3.0)
    }

    /// `Γ̃ = -Γ`, for reducing a negative-mass functional to a positive one.
    pub fn reflected(&self) -> Result<LinearFunctional, FunctionalError> {
        let grid = Grid::new(self.a, self.b, SIGN_GRID_INTERVALS).expect("valid interval");
        let mass = self.mass(&grid)?;
        if mass > 0.0 {
            return Err(FunctionalError::PositiveMass(mass));
        }
        Ok(self.negated())
    }

    pub fn negated(&self) -> LinearFunctional {
        LinearFunctional {
            a: self.a,
            b: self.b,
            atoms: self
                .atoms
                .iter()
                .map(|atom| Atom {
                    at: atom.at,
                    weight: -atom.weight,
                })
                .collect(),
            density: self.density.clone(),
            negated_density: !self.negated_density,
        }
    }
}

/// A functional resolved to per-node weights on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalFunctional {
    grid: Grid,
    weights: Vec<f64>,
    density_weights: Vec<f64>,
    atoms: Vec<Atom>,
}

impl NodalFunctional {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> Result<f64, FunctionalError> {
        let mut m = 0.0;
        for w in &self.weights {
            m += w;
        }
        if m.abs() < DEGENERATE_MASS {
            return Err(FunctionalError::DegenerateMass(m));
        }
        Ok(m)
    }

    pub fn apply(&self, u: &SampledPath) -> Vec<f64> {
        assert_eq!(
            u.len(),
            self.weights.len(),
            "path and functional grids differ"
        );
        let mut out = vec![0.0; u.dim()];
        for (j, w) in self.weights.iter().enumerate() {
            for (acc, v) in out.iter_mut().zip(u.node(j)) {
                *acc += w * v;
            }
        }
        out
    }

    /// `Θ` as `Γ` applied to the running trapezoid integral of `integrand`.
    pub fn theta_direct(&self, integrand: &SampledPath) -> Vec<f64> {
        self.apply(&integrand.cumulative_trapezoid())
    }

    /// `Θ = ∫ f(s) g(s) ds`: the density part is a weighted sum of the
    /// integrand against the discrete cumulative weight, and each atom picks up
    /// the running integral at its location.
    pub fn theta(&self, integrand: &SampledPath) -> Vec<f64> {
        let g = self.density_cumulative_weights();
        let mut out = vec![0.0; integrand.dim()];
        for (j, gj) in g.iter().enumerate() {
            for (acc, v) in out.iter_mut().zip(integrand.node(j)) {
                *acc += gj * v;
            }
        }
        if !self.atoms.is_empty() {
            let running = integrand.cumulative_trapezoid();
            for atom in &self.atoms {
                for (acc, v) in out.iter_mut().zip(running.interpolate(atom.at)) {
                    *acc += atom.weight * v;
                }
            }
        }
        out
    }

    /// Quadrature weights `G_k` with `Σ_j ω_j F_j = Σ_k G_k f_k` for the density
    /// part `ω`, where `F` is the running trapezoid integral of `f`. `G_k / h`
    /// approximates the density contribution to `g(t_k)`.
    pub fn density_cumulative_weights(&self) -> Vec<f64> {
        let n = self.grid.intervals();
        let h = self.grid.step();
        let w = &self.density_weights;
        // suffix[j] = Σ_{i ≥ j} w_i
        let mut suffix = vec![0.0; n + 2];
        for j in (0..=n).rev() {
            suffix[j] = suffix[j + 1] + w[j];
        }
        let mut g = vec![0.0; n + 1];
        g[0] = 0.5 * h * suffix[1];
        for k in 1..n {
            g[k] = h * (0.5 * w[k] + suffix[k + 1]);
        }
        g[n] = 0.5 * h * w[n];
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid {
        Grid::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn masses() {
        let g = grid(200);
        assert!((LinearFunctional::integral(0.0, 1.0).mass(&g).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            LinearFunctional::point_evaluation(0.0, 1.0, 1.0)
                .unwrap()
                .mass(&g)
                .unwrap(),
            1.0
        );
        let two_atoms = LinearFunctional::new(
            0.0,
            1.0,
            vec![
                Atom {
                    at: 0.0,
                    weight: 2.0,
                },
                Atom {
                    at: 1.0,
                    weight: -1.0,
                },
            ],
            None,
        )
        .unwrap();
        assert_eq!(two_atoms.mass(&g).unwrap(), 1.0);
        let zero = LinearFunctional::new(
            0.0,
            1.0,
            vec![
                Atom {
                    at: 0.0,
                    weight: 1.0,
                },
                Atom {
                    at: 1.0,
                    weight: -1.0,
                },
            ],
            None,
        )
        .unwrap();
        assert!(matches!(
            zero.mass(&g),
            Err(FunctionalError::DegenerateMass(_))
        ));
    }

    #[test]
    fn apply_examples() {
        let g = grid(200);
        let ramp = SampledPath::from_fn(g, 1, |t| vec![t]);
        let at_b = LinearFunctional::point_evaluation(0.0, 1.0, 1.0).unwrap();
        assert_eq!(at_b.apply(&ramp).unwrap(), vec![1.0]);
        let mean = LinearFunctional::integral(0.0, 1.0);
        for v in mean.apply(&SampledPath::constant(g, &[1.0, 1.0])).unwrap() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        // exact antiderivative: ½
        assert!((mean.apply(&ramp).unwrap()[0] - 0.5).abs() < 1e-6);
        let other = SampledPath::constant(Grid::new(0.0, 2.0, 10).unwrap(), &[1.0]);
        assert!(matches!(
            mean.apply(&other),
            Err(FunctionalError::IntervalMismatch { .. })
        ));
    }

    #[test]
    fn atom_validation() {
        assert!(matches!(
            LinearFunctional::point_evaluation(0.0, 1.0, 1.5),
            Err(FunctionalError::AtomOutside { .. })
        ));
        let unordered = vec![
            Atom {
                at: 0.5,
                weight: 1.0,
            },
            Atom {
                at: 0.5,
                weight: 1.0,
            },
        ];
        assert!(matches!(
            LinearFunctional::new(0.0, 1.0, unordered, None),
            Err(FunctionalError::AtomsNotIncreasing { .. })
        ));
        let bad_density = Expression::parse_univariate("log(s)", "s").unwrap();
        assert!(matches!(
            LinearFunctional::new(0.0, 1.0, vec![], Some(bad_density)),
            Err(FunctionalError::Density(_))
        ));
    }

    #[test]
    fn cumulative_weight_examples() {
        let at_b = LinearFunctional::point_evaluation(0.0, 1.0, 1.0).unwrap();
        let at_a = LinearFunctional::point_evaluation(0.0, 1.0, 0.0).unwrap();
        let mean = LinearFunctional::integral(0.0, 1.0);
        for s in [0.0, 0.3, 0.999, 1.0] {
            assert_eq!(at_b.cumulative_weight(s).unwrap(), 1.0);
            assert!((mean.cumulative_weight(s).unwrap() - (1.0 - s)).abs() < 1e-12);
        }
        assert_eq!(at_a.cumulative_weight(0.0).unwrap(), 1.0);
        assert_eq!(at_a.cumulative_weight(0.2).unwrap(), 0.0);
    }

    #[test]
    fn cumulative_weight_matches_indicator_quadrature() {
        // g(s) = ∫_0^1 χ_[0,t](s) dt, integrated directly over t.
        let mean = LinearFunctional::integral(0.0, 1.0);
        for s in [0.1, 0.5, 0.75] {
            let n = 20000;
            let direct: f64 = (0..n)
                .map(|i| (i as f64 + 0.5) / n as f64)
                .filter(|t| s <= *t)
                .count() as f64
                / n as f64;
            assert!((mean.cumulative_weight(s).unwrap() - direct).abs() < 1e-4);
        }
    }

    #[test]
    fn theta_examples() {
        let g = grid(200);
        let at_b = LinearFunctional::point_evaluation(0.0, 1.0, 1.0)
            .unwrap()
            .on_grid(&g)
            .unwrap();
        let mean = LinearFunctional::integral(0.0, 1.0).on_grid(&g).unwrap();
        let zero = SampledPath::constant(g, &[0.0, 0.0]);
        let one = SampledPath::constant(g, &[1.0]);
        assert_eq!(mean.theta(&zero), vec![0.0, 0.0]);
        assert!((at_b.theta(&one)[0] - 1.0).abs() < 1e-14);
        assert!((mean.theta(&one)[0] - 0.5).abs() < 1e-14);
        assert!((mean.theta_direct(&one)[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn reflection() {
        let g = grid(50);
        let neg = LinearFunctional::new(
            0.0,
            1.0,
            vec![Atom {
                at: 1.0,
                weight: -1.0,
            }],
            None,
        )
        .unwrap();
        let refl = neg.reflected().unwrap();
        assert_eq!(refl.mass(&g).unwrap(), 1.0);
        assert!(matches!(
            LinearFunctional::integral(0.0, 1.0).reflected(),
            Err(FunctionalError::PositiveMass(_))
        ));
        let neg_density = LinearFunctional::integral(0.0, 1.0).negated();
        assert!((neg_density.mass(&g).unwrap() + 1.0).abs() < 1e-12);
        assert!((neg_density.reflected().unwrap().mass(&g).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_path_reproduces_mass_exactly() {
        let g = grid(37);
        let rho = Expression::parse_univariate("1 + s^2", "s").unwrap();
        let f = LinearFunctional::new(
            0.0,
            1.0,
            vec![Atom {
                at: 0.123,
                weight: 0.7,
            }],
            Some(rho),
        )
        .unwrap();
        let nodal = f.on_grid(&g).unwrap();
        assert_eq!(
            nodal.apply(&SampledPath::constant(g, &[1.0]))[0],
            nodal.mass().unwrap()
        );
    }
}
