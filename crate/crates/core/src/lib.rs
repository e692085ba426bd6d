//! Closed-form optimal hard negatives.
//!
//! A positive pair of embeddings on the unit sphere spans a geodesic arc. The
//! hardest negative between two classes is the closest pair of points across
//! their arcs, which [`arc_solver`] finds exactly by enumerating the KKT cases
//! of a two-angle box-constrained problem. [`segment_solver`] does the same for
//! straight segments in Euclidean space, [`oracle`] brute-forces both for
//! validation, [`batch_engine`] runs the solver over a batch, [`losses`] turns
//! the distances into metric-learning objectives and [`trainer`] drives a small
//! gradient-descent experiment on synthetic data.

pub mod arc_solver;
pub mod geometry;
pub mod oracle;
pub mod segment_solver;
pub mod batch_engine;
pub mod losses;
pub mod trainer;
