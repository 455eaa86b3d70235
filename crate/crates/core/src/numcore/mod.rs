//! Polynomial, transfer-function and state-space primitives.

mod polynomial;
mod state_space;
mod transfer_function;

pub use num_complex::Complex64;
pub use polynomial::{poly_mul, poly_roots, Polynomial};
pub use state_space::{tf_to_statespace, StateSpace};
pub use transfer_function::TransferFunction;

/// Imaginary parts below this magnitude are reported as real.
pub const REAL_DISPLAY_TOL: f64 = 1e-9;

/// Formats a complex number, dropping a negligible imaginary part.
pub fn format_complex(z: Complex64) -> String {
    if z.im.abs() < REAL_DISPLAY_TOL {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

/// Sorts roots by real part, then imaginary part.
pub fn sort_roots(roots: &mut [Complex64]) {
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}
