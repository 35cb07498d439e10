//! Fixtures shared by the benchmarks in `benches/`.

use iwasawa_core::linalg::{random_ginibre, random_unitary};
use iwasawa_core::{build_frame, ComplexMatrix, SpectralFrame};

/// A regular frame: `X₀` with spectrum `n, …, 1` in a random basis.
pub fn regular_frame(n: usize, seed: u64) -> SpectralFrame {
    let u = random_unitary(n, seed);
    let d = ComplexMatrix::from_diagonal(&(0..n).map(|i| (n - i) as f64).collect::<Vec<_>>());
    build_frame(&(&(&u * &d) * &u.adjoint()).hermitian_part(), 1e-8).expect("distinct spectrum")
}

/// A frame with blocks of size `block`.
pub fn block_frame(n: usize, block: usize, seed: u64) -> SpectralFrame {
    let u = random_unitary(n, seed);
    let d = ComplexMatrix::from_diagonal(&(0..n).map(|i| (n / block - i / block) as f64).collect::<Vec<_>>());
    build_frame(&(&(&u * &d) * &u.adjoint()).hermitian_part(), 1e-8).expect("clustered spectrum")
}

/// A well-conditioned matrix: `G + 2√n·I` for Ginibre `G`.
pub fn invertible(n: usize, seed: u64) -> ComplexMatrix {
    &random_ginibre(n, seed) + &ComplexMatrix::identity(n).scale_real(2.0 * (n as f64).sqrt())
}

pub fn hermitian(n: usize, seed: u64) -> ComplexMatrix {
    random_ginibre(n, seed).hermitian_part()
}
