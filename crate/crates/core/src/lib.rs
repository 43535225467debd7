//! Point counts of affine varieties over F_p in all cyclic translates of a
//! box, their second moments, and the exponential sums behind them.

pub mod accum;
pub mod boxes;
pub mod catalog;
pub mod error;
pub mod experiment;
pub mod expsum;
pub mod ffgrid;
pub mod polymap;
pub mod report;
pub mod sweep;
pub mod variety;

pub use boxes::{BoxSpec, CyclicBox, CyclicInterval, LengthSpec};
pub use error::{Error, Result};
pub use ffgrid::{CellBudget, GridShape, PhaseTable, Prime};
pub use polymap::PolyMap;
pub use sweep::{CountField, MomentReport};
pub use variety::{PointSet, Polynomial, VarietySpec};
