//! Instantons on quaternionic projective space via harmonic space.
//!
//! The library builds the double fibration over HP^n out of flat
//! quaternionic coordinates, realises gauge fields through projector
//! cores in the ADHM style, checks the self-duality structure of their
//! curvature, and constructs the analytic (canonical) gauge in which
//! the gauge field collapses to a pair of holomorphic prepotentials.
//!
//! The numeric kernel is generic over the real scalar type (f32 or
//! f64); concrete f64 aliases are exported at the crate root.

pub mod adhm;
pub mod curvature;
pub mod error;
pub mod gauge;
pub mod geometry;
pub mod harmonic_gauge;
pub mod quatlin;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Real, C};

/// f64 quaternion.
pub type Quaternion64 = quatlin::Quaternion<f64>;
/// f64 complex matrix.
pub type CMatrix64 = quatlin::CMatrix<f64>;
/// f64 quaternion matrix.
pub type QuatMatrix64 = quatlin::QuatMatrix<f64>;
/// f64 harmonic-space point.
pub type HarmonicPoint64 = geometry::HarmonicPoint<f64>;
/// f64 cone point (zero section of the harmonic fibration).
pub type ConePoint64 = geometry::ConePoint<f64>;
/// f64 tangent direction.
pub type TangentDirection64 = geometry::TangentDirection<f64>;
/// f64 gauge core.
pub type Core64 = gauge::Core<f64>;
/// f64 ADHM data.
pub type AdhmData64 = adhm::AdhmData<f64>;
