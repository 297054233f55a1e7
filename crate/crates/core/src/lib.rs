pub mod bergman;
pub mod calibration;
pub mod canonical;
pub mod error;
pub mod homotopy;
pub mod linalg;
pub mod metric;
pub mod poly;
pub mod projective;
pub mod sampling;

pub use error::{Error, ErrorClass, Result};
pub use num_complex::Complex64;
pub use poly::HomogeneousPolynomial;
pub use projective::{conjugation, Hypersurface, ProjectivePoint, TangentFrame};
pub use sampling::{sample_complex_locus, sample_real_locus, Locus, SamplePool};
