//! Dyadic Haar analysis on finite-depth measured trees: the tree ultrametric,
//! the Haar orthonormal system, the nonlocal fractional operator diagonal in
//! that system, Besov energies in integral and coefficient form, the unitary
//! Schrödinger-type propagator, dyadic maximal operators, and the Sierpinski
//! gasket as the worked instance.
//!
//! Everything is exact at the tree's resolution: points are leaf cells, all
//! functions are piecewise constant on them, and every kernel integral is a
//! finite sum over cell pairs.
//!
//! ```
//! use treewave::{CellFunction, DyadicTree, HaarSystem};
//! use num_complex::Complex64;
//!
//! let tree = DyadicTree::uniform(3, 2)?;
//! let system = HaarSystem::build(&tree);
//! let f = CellFunction::indicator(&tree, tree.cube_at(&[0])?);
//! let spectrum = system.analyze(&f);
//! let back = system.synthesize(&spectrum)?;
//! assert!(f.sub(&back)?.norm() < 1e-12);
//! # Ok::<(), treewave::Error>(())
//! ```

pub mod besov;
pub mod error;
pub mod evolution;
pub mod field;
pub mod gasket;
pub mod haar;
pub mod io;
pub mod maximal;
pub mod operator;
pub mod sampling;
pub mod sum;
pub mod tree;

pub use error::{Error, Result};
pub use field::CellFunction;
pub use haar::{HaarSpectrum, HaarSystem, HaarWavelet};
pub use tree::{CubeId, DyadicTree, Point, TreeLimits, TreeSpec, TreeSpecNode, UniformSpec};

pub use num_complex::Complex64;
