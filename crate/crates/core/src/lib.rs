//! Curvature G-equation in the two-dimensional cellular flow
//! `V = A(-cos x₂ sin x₁, cos x₁ sin x₂)`: an explicit level-set solver, the
//! associated deterministic two-player game, and estimators of the effective
//! burning velocity.

pub mod cli;
pub mod contour;
pub mod error;
pub mod flowfield;
pub mod game;
pub mod geom;
pub mod grid;
pub mod homogenize;
pub mod levelset;
mod par;
pub mod supersolution;
pub mod trajectory;

pub use error::{Error, Result};
pub use flowfield::CellularFlow;
pub use geom::{Sym2, Vec2};
pub use grid::Grid2;
pub use par::is_parallel;
