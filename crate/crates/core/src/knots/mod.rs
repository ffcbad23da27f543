//! Knot programs, augmented grids and the accumulation-point decomposition.

mod accumulation;
mod decompose;
mod grid;
mod program;

pub use accumulation::{AccumulationSet, Piece};
pub use decompose::{Component, Decomposition};
pub use grid::Grid;
pub(crate) use grid::{anchor_index, hull_length, is_submultiset, mesh_width, positive_span};
pub use program::{KnotFamily, KnotProgram, Side};
