pub mod error;
pub mod lattice;
pub mod linalg;
pub mod polytope;
pub mod subdivision;
pub mod theta;
pub mod monge_ampere;
pub mod heisenberg;
pub mod expansion;
pub mod balanced;

pub use balanced::{AbelianFiber, GramMatrix, HermitianWeight};
pub use error::{Error, Result};
pub use heisenberg::{HeisenbergElement, MonomialMatrix};
pub use lattice::{AffineLinear, LatticeVector, QForm};
pub use monge_ampere::{AtomicMeasure, TestFunction};
pub use subdivision::{build_subdivision, Cell, PeriodicSubdivision, QuotientComplex};
pub use theta::ThetaContext;
