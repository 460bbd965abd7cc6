//! Matching of partially overlapping point sets by concave energy
//! minimisation over correspondence matrices.
//!
//! The model set `X` (`m` points) and scene set `Y` (`n` points) are matched
//! with exactly `n_p` pairs. Correspondences are `m x n` matrices flattened row
//! by row. A transformation model is folded into an energy that is concave in
//! the correspondence, and the global minimum is found by simplicial
//! branch-and-bound in a low-dimensional reduced space.

pub mod assign;
pub mod cli;
pub mod bnb;
pub mod energy;
pub mod error;
pub mod feasible;
pub mod linalg;
pub mod matcher;
pub mod plot;
pub mod points;
pub mod synth;

pub use error::{Error, Result};
pub use feasible::Feasible;
pub use matcher::{match_point_sets, MatchOptions, MatchOutcome, Mode, PairCount};
pub use points::PointSet;
