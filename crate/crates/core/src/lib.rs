//! Infinitely divisible approximation of sums of independent discrete random
//! vectors, concentration functions, and Lévy-type distances over convex
//! polyhedra.
//!
//! The crate is organized bottom-up:
//!
//! - [`distributions`]: finite discrete laws on `R^d` (convolution,
//!   push-forward, characteristic functions, seeded sampling);
//! - [`concentration`]: interval and ball concentration functions and the
//!   core/tail decomposition of a summand;
//! - [`compound_poisson`]: the compound-Poisson map `ξ ↦ e(ξ)` and the
//!   accompanying approximant `η₀ = Σ [aᵢ + e(ξᵢ − aᵢ)]`;
//! - [`polyhedra`]: H-polyhedra, slab expansions, projections, faces,
//!   normal cones, direction nets and the constraint augmentation that makes
//!   slab expansions fit inside metric neighborhoods;
//! - [`metrics`]: orthant, slab, neighborhood and uniform polyhedral
//!   distances evaluated over explicit finite families;
//! - [`harness`]: reproducible experiments and reports.

pub mod compound_poisson;
pub mod concentration;
pub mod distributions;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod lp;
pub mod metrics;
pub mod polyhedra;
pub mod rng;

pub use distributions::{AtomicLaw, DiscreteDistribution, Point, SubProbabilityDistribution};
pub use error::{Error, Result};
pub use polyhedra::Polyhedron;
