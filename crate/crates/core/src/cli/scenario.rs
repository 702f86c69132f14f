//! Scenario files: one JSON document per problem.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::expr::Expression;
use crate::field::VectorField;
use crate::functionals::{Atom, LinearFunctional};
use crate::hypotheses::DEFAULT_SAMPLES;
use crate::regions::{AdmissiblePair, ConvexPiece, Region};
use crate::solver::{BcKind, Operator, SolverOptions};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: impl Into<String>, message: impl ToString) -> ScenarioError {
    ScenarioError::Invalid {
        path: path.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionSpec {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Tube { center: Vec<f64>, radius: f64 },
    HalfSpace { normal: Vec<f64>, offset: f64 },
    Intersection(Vec<ConvexPiece>),
    Sublevel { h: String, bound: f64 },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSpec {
    #[default]
    Construct,
    HalfSquaredDistance,
    User {
        h: String,
        #[serde(default)]
        p: Option<Vec<String>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSpec {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    /// Expression in `s`.
    #[serde(default)]
    pub density: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(rename = "N")]
    pub intervals: Option<usize>,
    pub schedule: Option<Vec<f64>>,
    pub tolerance: Option<f64>,
    pub relative_tolerance: Option<f64>,
    pub max_picard: Option<usize>,
    pub max_newton: Option<usize>,
    pub operator: Option<Operator>,
    pub initial: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum CheckName {
    H0,
    #[serde(rename = "H0'")]
    H0Prime,
    H1,
    H2,
    H3,
    H4,
    #[serde(rename = "H4'")]
    H4Prime,
    #[serde(rename = "H4''")]
    H4DoublePrime,
    H5,
    #[serde(rename = "H5''")]
    H5Strict,
    H6,
}

fn default_checks() -> Vec<CheckName> {
    vec![CheckName::H0, CheckName::H1, CheckName::H3, CheckName::H4]
}

fn default_band() -> f64 {
    0.1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    pub interval: [f64; 2],
    pub dimension: usize,
    pub field: Vec<String>,
    pub region: RegionSpec,
    #[serde(default)]
    pub pair: PairSpec,
    #[serde(default)]
    pub functional: Option<FunctionalSpec>,
    #[serde(default)]
    pub r: Option<Vec<f64>>,
    pub bc: BcKind,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default = "default_checks")]
    pub checks: Vec<CheckName>,
    /// `ε` of the band check `H4''`.
    #[serde(default = "default_band")]
    pub band_epsilon: f64,
}

/// A validated scenario with every object built.
#[derive(Debug, Clone)]
pub struct Problem {
    pub scenario: Scenario,
    pub field: VectorField,
    pub region: Region,
    pub pair: AdmissiblePair,
    pub functional: Option<LinearFunctional>,
    pub r: Vec<f64>,
    pub options: SolverOptions,
    pub operator: Option<Operator>,
    pub seed: u64,
    pub samples: usize,
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = serde_json::from_str(text)?;
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    fn validate(&self) -> Result<(), ScenarioError> {
        let n = self.dimension;
        if n == 0 {
            return Err(invalid("dimension", "must be positive"));
        }
        let [a, b] = self.interval;
        if !(a < b) {
            return Err(invalid("interval", format!("need a < b, got [{a}, {b}]")));
        }
        if self.field.len() != n {
            return Err(invalid(
                "field",
                format!("expected {n} components, got {}", self.field.len()),
            ));
        }
        if let Some(r) = &self.r {
            if r.len() != n {
                return Err(invalid(
                    "r",
                    format!("expected {n} components, got {}", r.len()),
                ));
            }
        }
        if let Some(x) = &self.solver.initial {
            if x.len() != n {
                return Err(invalid(
                    "solver.initial",
                    format!("expected {n} components, got {}", x.len()),
                ));
            }
        }
        if matches!(self.bc, BcKind::Cg | BcKind::Cg2) && self.functional.is_none() {
            return Err(invalid(
                "functional",
                format!("required for bc {:?}", self.bc),
            ));
        }
        if !(self.band_epsilon > 0.0) {
            return Err(invalid("band_epsilon", "must be positive"));
        }
        Ok(())
    }

    /// Builds every object. With `check_pair` a user pair must agree with the
    /// region on samples; the `check` command turns this off so the
    /// disagreement is reported instead.
    pub fn build(
        &self,
        check_pair: bool,
        seed_override: Option<u64>,
    ) -> Result<Problem, ScenarioError> {
        let n = self.dimension;
        let [a, b] = self.interval;
        let field = self
            .field
            .iter()
            .enumerate()
            .map(|(i, text)| {
                Expression::parse(text, n).map_err(|e| invalid(format!("field[{i}]"), e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let field = VectorField::new(field, n).map_err(|e| invalid("field", e))?;
        let region = self.build_region()?;
        let pair = match &self.pair {
            PairSpec::Construct => {
                AdmissiblePair::construct(&region).map_err(|e| invalid("pair", e))?
            }
            PairSpec::HalfSquaredDistance => {
                AdmissiblePair::half_squared_distance(&region).map_err(|e| invalid("pair", e))?
            }
            PairSpec::User { h, p } => {
                let h = Expression::parse(h, n).map_err(|e| invalid("pair.user.h", e))?;
                let p = match p {
                    Some(p) => Some(
                        p.iter()
                            .enumerate()
                            .map(|(i, s)| {
                                Expression::parse(s, n)
                                    .map_err(|e| invalid(format!("pair.user.p[{i}]"), e))
                            })
                            .collect::<Result<Vec<_>, _>>()?,
                    ),
                    None => None,
                };
                let built = if check_pair {
                    AdmissiblePair::from_user(&region, h, p)
                } else {
                    AdmissiblePair::from_user_unchecked(&region, h, p)
                };
                built.map_err(|e| invalid("pair.user", e))?
            }
        };
        let functional = match &self.functional {
            Some(spec) => {
                let density = match &spec.density {
                    Some(text) => Some(
                        Expression::parse_univariate(text, "s")
                            .map_err(|e| invalid("functional.density", e))?,
                    ),
                    None => None,
                };
                Some(
                    LinearFunctional::new(a, b, spec.atoms.clone(), density)
                        .map_err(|e| invalid("functional", e))?,
                )
            }
            None => None,
        };
        let defaults = SolverOptions::default();
        let s = &self.solver;
        let options = SolverOptions {
            intervals: s.intervals.unwrap_or(defaults.intervals),
            schedule: s.schedule.clone().unwrap_or(defaults.schedule),
            tolerance: s.tolerance.unwrap_or(defaults.tolerance),
            relative_tolerance: s.relative_tolerance.unwrap_or(defaults.relative_tolerance),
            max_picard: s.max_picard.unwrap_or(defaults.max_picard),
            max_newton: s.max_newton.unwrap_or(defaults.max_newton),
            min_lambda_step: defaults.min_lambda_step,
            initial: s.initial.clone(),
        };
        if options.intervals < 2 {
            return Err(invalid("solver.N", "need at least 2 intervals"));
        }
        if options.schedule.is_empty() || options.schedule.iter().any(|l| !(0.0..=1.0).contains(l))
        {
            return Err(invalid("solver.schedule", "values must lie in [0, 1]"));
        }
        Ok(Problem {
            scenario: self.clone(),
            field,
            region,
            pair,
            functional,
            r: self.r.clone().unwrap_or_else(|| vec![0.0; n]),
            options,
            operator: s.operator,
            seed: seed_override.unwrap_or(s.seed),
            samples: s.samples.unwrap_or(DEFAULT_SAMPLES),
        })
    }

    fn build_region(&self) -> Result<Region, ScenarioError> {
        let n = self.dimension;
        let [a, b] = self.interval;
        let built = match &self.region {
            RegionSpec::Ball { center, radius } => Region::ball(a, b, center.clone(), *radius),
            RegionSpec::Box { lo, hi } => Region::boxed(a, b, lo.clone(), hi.clone()),
            RegionSpec::Tube { center, radius } => Region::tube(a, b, center.clone(), *radius),
            RegionSpec::HalfSpace { normal, offset } => Region::convex(
                a,
                b,
                n,
                vec![ConvexPiece::HalfSpace {
                    normal: normal.clone(),
                    offset: *offset,
                }],
            ),
            RegionSpec::Intersection(pieces) => Region::convex(a, b, n, pieces.clone()),
            RegionSpec::Sublevel { h, bound } => {
                let h = Expression::parse(h, n).map_err(|e| invalid("region.sublevel.h", e))?;
                Region::sublevel(a, b, n, h, *bound)
            }
        };
        built.map_err(|e| invalid("region", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
        "interval": [0, 1], "dimension": 2,
        "field": ["-2*x1*exp(-x2)", "-x2*exp(-x1)"],
        "region": {"ball": {"center": [0, 0, 0], "radius": 2}},
        "pair": "half_squared_distance",
        "functional": {"density": "1"},
        "r": [1, 1], "bc": "cg2"
    }"#;

    #[test]
    fn defaults_are_applied() {
        let s = parse_scenario(EXAMPLE).unwrap();
        assert_eq!((s.dimension, s.bc), (2, BcKind::Cg2));
        let p = s.build(true, None).unwrap();
        assert_eq!(p.options.intervals, 400);
        assert_eq!(p.options.schedule.len(), 11);
        assert_eq!(p.seed, 0);
        assert_eq!(p.samples, DEFAULT_SAMPLES);
        assert_eq!(s.build(true, Some(9)).unwrap().seed, 9);
    }

    #[test]
    fn missing_region_names_the_key() {
        let text = EXAMPLE.replace(
            r#""region": {"ball": {"center": [0, 0, 0], "radius": 2}},"#,
            "",
        );
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("region"), "{err}");
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let text = EXAMPLE.replace(r#""-x2*exp(-x1)""#, r#""-x2*exp(-x1)", "0""#);
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.starts_with("field:"), "{err}");
    }

    #[test]
    fn expression_errors_carry_the_path() {
        let text = EXAMPLE.replace("-x2*exp(-x1)", "-x3");
        let err = parse_scenario(&text)
            .unwrap()
            .build(true, None)
            .unwrap_err()
            .to_string();
        assert!(err.starts_with("field[1]"), "{err}");
    }

    #[test]
    fn region_forms() {
        for region in [
            r#"{"box": {"lo": [0, -1, -1], "hi": [1, 1, 1]}}"#,
            r#"{"tube": {"center": [0, 0], "radius": 1}}"#,
            r#"{"intersection": [{"ball": {"center": [0, 0, 0], "radius": 2}}, {"half_space": {"normal": [0, 1, 0], "offset": 0.5}}]}"#,
            r#"{"sublevel": {"h": "x1^2 + x2^2 - 1", "bound": 2}}"#,
        ] {
            let text = EXAMPLE
                .replace(r#"{"ball": {"center": [0, 0, 0], "radius": 2}}"#, region)
                .replace(r#""half_squared_distance""#, r#""construct""#);
            let s = parse_scenario(&text).unwrap();
            if region.contains("sublevel") {
                // the blended construction needs a convex region
                let mut s = s;
                s.pair = PairSpec::User {
                    h: "x1^2 + x2^2 - 1".into(),
                    p: None,
                };
                s.build(true, None).unwrap();
            } else {
                s.build(true, None).unwrap();
            }
        }
    }
}
