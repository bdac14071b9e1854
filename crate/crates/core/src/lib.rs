//! Finite-scale coarse geometry laboratory.
//!
//! The crate works with *samples* of unbounded proper metric spaces: a finite
//! point set organized into dyadic annuli around a base point, with an exact
//! distance oracle. On top of that it builds
//!
//! - weighted-graph models of compact path spaces (circles, spheres,
//!   intervals) in [`spaces`],
//! - the Euclidean cone of a compact space and an unbounded one, realized as
//!   a weighted product graph with cached shortest paths, in [`cone`],
//! - sublinear-Higson / classical-Higson function analysis (scale constants,
//!   moduli, witness families) in [`functions`],
//! - bounded-geometry covers, Lipschitz partitions of unity, and the
//!   smoothing operator with its explicit variation bound in [`smoothing`],
//! - coarse-map and sublinear-closeness checkers, positive-determinant
//!   matrix paths, and cone homotopies in [`maps`],
//! - the slice/product operators relating functions on the cone to families
//!   of functions on the fiber in [`tensor`].
//!
//! Everything is deterministic: sampling and noise come from a fixed 64-bit
//! mixing function ([`mix`]), and all reductions are order-independent, so
//! identical inputs give identical reports.

pub mod cone;
pub mod error;
pub mod functions;
pub mod maps;
pub mod mix;
pub mod smoothing;
pub mod spaces;
pub mod tensor;

pub use error::{Error, Result};
pub use spaces::{CompactGraph, MetricSpace, SampledSpace};
