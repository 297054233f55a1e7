//! Fixtures shared by the benchmarks.

use lagcal_core::{HomogeneousPolynomial, Hypersurface};

/// x^4 + y^4 - z^4
pub fn quartic() -> Hypersurface {
    Hypersurface::new(HomogeneousPolynomial::fermat(&[1.0, 1.0, -1.0], 4).unwrap()).unwrap()
}

pub fn quintic_surface() -> Hypersurface {
    Hypersurface::new(HomogeneousPolynomial::fermat(&[1.0, 1.0, 1.0, 1.0], 5).unwrap()).unwrap()
}
