//! Numerical laboratory for backward-contraction and Collet–Eckmann type
//! conditions of polynomial dynamics.

pub mod conditions;
pub mod cser;
pub mod critical;
pub mod error;
pub mod geometry;
pub mod interval;
pub mod julia;
pub mod orbit;
pub mod poly;
pub mod pullback;
pub mod puzzle;
pub mod report;
pub mod roots;

pub use critical::{classify_critical_points, ClassifyOptions, CriticalFate, CriticalPoint, CriticalSet};
pub use error::{DynError, Result};
pub use num_complex::Complex64;
pub use orbit::{orbit, CycleInfo, CycleKind, OrbitRecord};
pub use poly::Polynomial;
