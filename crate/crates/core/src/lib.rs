pub mod cli;
pub mod expr;
pub mod field;
pub mod functionals;
pub mod hypotheses;
pub mod path;
pub mod regions;
pub mod solver;
mod vecops;
