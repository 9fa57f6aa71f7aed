//! Lowest-order virtual element methods on anisotropic 3D polyhedral meshes.
//!
//! The crate builds polyhedral meshes from a Cartesian background grid and an
//! analytic level set, in two flavors:
//!
//! * **fitted** meshes, where every background cuboid crossed by the interface
//!   is replaced by its two cut pieces (arbitrarily thin slivers are kept), and
//! * **unfitted** meshes, where cut cuboids stay whole and carry a local
//!   interface plane; the projection space on those elements is an immersed
//!   (IFE) space that satisfies the coefficient jump conditions exactly.
//!
//! On either mesh the discretization is the lowest-order VEM driven by a
//! boundary triangulation of each element: nodal DoFs on the element vertices,
//! a computable elliptic projection onto the (affine or immersed) projection
//! space, and a surface-gradient stabilization. Interior values of the virtual
//! functions are never computed.
//!
//! The `boundary` module also ships the mesh-quality validators that make this
//! discretization trustworthy on anisotropic elements: maximum-angle bounds of
//! the boundary triangulation, the path condition and its local variant, an
//! explicit discrete Poincaré bound per element, and inscribed-ball radii.
//!
//! Entry points:
//!
//! * [`mesh::cartesian_background`], [`mesh::build_fitted`], [`mesh::build_unfitted`]
//! * [`operators::assemble`] and [`solver::solve`]
//! * [`study::run_convergence`], [`study::run_validate`], [`study::run_mesh`]
//!   (the same drivers behind the `polyvem` binary)
//!
//! See the crate `examples/` directory for one runnable example per
//! capability.

pub mod boundary;
pub mod error;
pub mod geometry;
pub mod mesh;
pub mod operators;
pub mod solver;
pub mod spaces;
pub mod study;

pub use error::{Error, Result};
