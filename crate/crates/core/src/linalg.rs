//! Dense complex matrices and the numeric kernels everything else is built on.
//!
//! [`ComplexMatrix`] wraps an `nalgebra` dense matrix and guarantees that its
//! entries were finite when it was constructed from outside data. Matrices
//! are immutable values; every kernel here is a pure function.

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Relative tolerance for Hermitian-ness checks.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Default relative residual tolerance.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Pivots below `‖a‖_F · SINGULAR_PIVOT_TOL` are treated as zero.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-13;
/// Above this size operator norms switch from dense SVD to power iteration.
pub const DENSE_SVD_LIMIT: usize = 1024;

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMatrix(format!(
                "dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if entries.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|z| !z.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "entry ({}, {}) is not finite",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, &entries)))
    }

    /// Builds a real matrix from row-major entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::new(rows, cols, entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_nalgebra(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::InvalidMatrix("empty matrix".into()));
        }
        if m.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        Ok(Self(m))
    }

    pub(crate) fn wrap(m: DMatrix<C64>) -> Self {
        Self(m)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { C64::new(values[i], 0.0) } else { ZERO })
    }

    pub fn from_complex_diagonal(values: &[C64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { ZERO })
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    /// Entries in row-major order.
    pub fn row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn conj(&self) -> Self {
        Self(self.0.map(|z| z.conj()))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// `self·other − other·self`.
    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    /// `½(self + self*)`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    pub fn is_real(&self) -> bool {
        self.0.iter().all(|z| z.im == 0.0)
    }

    pub fn submatrix(&self, row: usize, col: usize, nrows: usize, ncols: usize) -> Self {
        Self(self.0.view((row, col), (nrows, ncols)).into_owned())
    }

    /// Copy of the first `count` columns.
    pub fn leading_columns(&self, count: usize) -> Self {
        Self(self.0.columns(0, count).into_owned())
    }

    /// Distance to the identity in Frobenius norm.
    pub fn identity_residual(&self) -> f64 {
        let n = self.rows().min(self.cols());
        let mut acc = 0.0;
        for j in 0..self.cols() {
            for i in 0..self.rows() {
                let target = if i == j && i < n { ONE } else { ZERO };
                acc += (self.0[(i, j)] - target).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// `‖self − self*‖_F`.
    pub fn hermitian_defect(&self) -> f64 {
        (&self.0 - self.0.adjoint())
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows(), self.cols())?;
        for i in 0..self.rows() {
            write!(f, "  ")?;
            for j in 0..self.cols() {
                let z = self.0[(i, j)];
                write!(f, "{:>10.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

/// Exponent of a Schatten norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchattenP {
    Finite(f64),
    Infinity,
}

impl SchattenP {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_infinite() && p > 0.0 {
            Ok(SchattenP::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(SchattenP::Finite(p))
        } else {
            Err(Error::InvalidSchattenExponent(p))
        }
    }
}

impl fmt::Display for SchattenP {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchattenP::Finite(p) => write!(f, "{p}"),
            SchattenP::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for SchattenP {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "op" => Ok(SchattenP::Infinity),
            other => {
                let p: f64 = other.parse().map_err(|_| Error::InvalidSchattenExponent(f64::NAN))?;
                SchattenP::new(p)
            }
        }
    }
}

pub fn adjoint(m: &ComplexMatrix) -> ComplexMatrix {
    m.adjoint()
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Eigenvalues, non-increasing.
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are the matching eigenvectors.
    pub vectors: ComplexMatrix,
}

/// Eigenvalues in descending order with a unitary eigenvector matrix.
///
/// `tol` bounds the accepted asymmetry relative to `1 + ‖h‖_F`; the matrix is
/// symmetrized before factorization.
pub fn hermitian_eig(h: &ComplexMatrix, tol: f64) -> Result<HermitianEig> {
    ensure_square(h)?;
    let n = h.rows();
    let norm = h.frobenius_norm();
    let bound = tol * (1.0 + norm);
    let defect = h.hermitian_defect();
    if defect > bound {
        return Err(Error::NotHermitian {
            residual: defect,
            bound,
        });
    }

    let is_diagonal = (0..n).all(|j| (0..n).all(|i| i == j || h[(i, j)] == ZERO));
    let (raw_values, raw_vectors) = if is_diagonal {
        (
            (0..n).map(|i| h[(i, i)].re).collect::<Vec<_>>(),
            DMatrix::<C64>::identity(n, n),
        )
    } else {
        let sym = h.hermitian_part().into_inner();
        let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 200 * n + 1000).ok_or(Error::ConvergenceFailure {
            residual: f64::INFINITY,
        })?;
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw_values[b].total_cmp(&raw_values[a]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&k| raw_values[k]).collect();
    let vectors = ComplexMatrix(DMatrix::from_fn(n, n, |i, j| raw_vectors[(i, order[j])]));

    if !is_diagonal {
        let lambda = ComplexMatrix::from_diagonal(&values);
        let residual = (&(h * &vectors) - &(&vectors * &lambda)).frobenius_norm();
        if residual > 1e-12 * norm {
            return Err(Error::ConvergenceFailure { residual });
        }
    }
    Ok(HermitianEig { values, vectors })
}

/// Matrix exponential by scaling and squaring with a Padé approximant.
pub fn matrix_exp(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(m)?;
    Ok(ComplexMatrix(m.0.exp()))
}

/// Singular values, largest first.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    let mut sv: Vec<f64> = if m.is_real() {
        let real = m.0.map(|z| z.re);
        real.singular_values().iter().copied().collect()
    } else {
        m.0.singular_values().iter().copied().collect()
    };
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn schatten_norm(m: &ComplexMatrix, p: SchattenP) -> f64 {
    match p {
        SchattenP::Finite(2.0) => m.frobenius_norm(),
        SchattenP::Finite(q) => {
            let sv = singular_values(m);
            let top = sv.first().copied().unwrap_or(0.0);
            if top == 0.0 {
                return 0.0;
            }
            top * sv.iter().map(|s| (s / top).powf(q)).sum::<f64>().powf(1.0 / q)
        }
        SchattenP::Infinity => singular_values(m).first().copied().unwrap_or(0.0),
    }
}

/// Largest singular value; dense SVD up to [`DENSE_SVD_LIMIT`], power
/// iteration on `m*m` beyond it.
pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    if m.rows().max(m.cols()) <= DENSE_SVD_LIMIT {
        schatten_norm(m, SchattenP::Infinity)
    } else {
        power_iteration_norm(m, 1e-6, 100_000)
    }
}

/// Largest singular value by power iteration on `m*m`, stopping once the
/// estimate changes by less than `rel_tol` relative.
pub fn power_iteration_norm(m: &ComplexMatrix, rel_tol: f64, max_iter: usize) -> f64 {
    let n = m.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = nalgebra::DVector::<C64>::from_fn(n, |_, _| {
        C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
    });
    v /= C64::new(v.norm(), 0.0);
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let w = &m.0 * &v;
        let sigma = w.norm();
        if sigma == 0.0 {
            return 0.0;
        }
        let mut next = m.0.adjoint() * w;
        let norm = next.norm();
        next /= C64::new(norm, 0.0);
        v = next;
        if (sigma - estimate).abs() <= rel_tol * sigma {
            return sigma;
        }
        estimate = sigma;
    }
    estimate
}

/// LU factorization with partial pivoting, stored compactly.
struct Lu {
    lu: DMatrix<C64>,
    perm: Vec<usize>,
    swaps: usize,
}

fn lu_factor(a: &ComplexMatrix) -> Result<Lu> {
    ensure_square(a)?;
    let n = a.rows();
    let threshold = a.frobenius_norm() * SINGULAR_PIVOT_TOL;
    let mut lu = a.0.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut swaps = 0;
    for k in 0..n {
        let (pivot_row, magnitude) =
            (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if magnitude <= threshold || magnitude == 0.0 {
            return Err(Error::Singular { pivot: k, magnitude });
        }
        if pivot_row != k {
            lu.swap_rows(k, pivot_row);
            perm.swap(k, pivot_row);
            swaps += 1;
        }
        let pivot = lu[(k, k)];
        for i in (k + 1)..n {
            let factor = lu[(i, k)] / pivot;
            lu[(i, k)] = factor;
            if factor != ZERO {
                for j in (k + 1)..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= factor * u;
                }
            }
        }
    }
    Ok(Lu { lu, perm, swaps })
}

/// Solves `a·x = b` for square `a`.
pub fn solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(a)?;
    if b.rows() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} rows", a.rows()),
            found: format!("{} rows", b.rows()),
        });
    }
    let Lu { lu, perm, .. } = lu_factor(a)?;
    let n = a.rows();
    let mut x = DMatrix::from_fn(n, b.cols(), |i, j| b.0[(perm[i], j)]);
    for col in 0..b.cols() {
        for i in 0..n {
            let mut acc = x[(i, col)];
            for k in 0..i {
                acc -= lu[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[(i, col)];
            for k in (i + 1)..n {
                acc -= lu[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = acc / lu[(i, i)];
        }
    }
    Ok(ComplexMatrix(x))
}

pub fn inverse(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    solve(a, &ComplexMatrix::identity(a.rows()))
}

pub fn determinant(a: &ComplexMatrix) -> Result<C64> {
    match lu_factor(a) {
        Ok(Lu { lu, swaps, .. }) => {
            let mut det = if swaps % 2 == 0 { ONE } else { -ONE };
            for k in 0..a.rows() {
                det *= lu[(k, k)];
            }
            Ok(det)
        }
        Err(Error::Singular { .. }) => Ok(ZERO),
        Err(e) => Err(e),
    }
}

/// Householder QR of a square matrix with `R` having a strictly positive
/// real diagonal.
pub fn qr_positive(m: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    ensure_square(m)?;
    let n = m.rows();
    let threshold = m.frobenius_norm() * SINGULAR_PIVOT_TOL;
    let mut r = m.0.clone();
    let mut reflectors: Vec<nalgebra::DVector<C64>> = Vec::with_capacity(n);

    for k in 0..n {
        let len = n - k;
        let x = r.view((k, k), (len, 1)).column(0).into_owned();
        let norm_x = x.norm();
        if norm_x <= threshold || norm_x == 0.0 {
            return Err(Error::Singular {
                pivot: k,
                magnitude: norm_x,
            });
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { ONE };
        let alpha = -phase * norm_x;
        let mut v = x;
        v[0] -= alpha;
        let vnorm = v.norm();
        if vnorm > 0.0 {
            v /= C64::new(vnorm, 0.0);
            // R[k.., k..] -= 2 v (v* R[k.., k..])
            for j in k..n {
                let mut dot = ZERO;
                for i in 0..len {
                    dot += v[i].conj() * r[(k + i, j)];
                }
                let dot = dot * 2.0;
                for i in 0..len {
                    r[(k + i, j)] -= v[i] * dot;
                }
            }
        }
        reflectors.push(v);
    }

    // Q = H_0 H_1 ... H_{n-1}, applied to the identity from the right end.
    let mut q = DMatrix::<C64>::identity(n, n);
    for k in (0..n).rev() {
        let v = &reflectors[k];
        if v.norm() == 0.0 {
            continue;
        }
        let len = n - k;
        for j in 0..n {
            let mut dot = ZERO;
            for i in 0..len {
                dot += v[i].conj() * q[(k + i, j)];
            }
            let dot = dot * 2.0;
            for i in 0..len {
                q[(k + i, j)] -= v[i] * dot;
            }
        }
    }

    // Rotate phases so that diag(R) is real positive.
    for k in 0..n {
        let d = r[(k, k)];
        let magnitude = d.norm();
        if magnitude <= threshold {
            return Err(Error::Singular { pivot: k, magnitude });
        }
        let phase = d / magnitude;
        for j in 0..n {
            r[(k, j)] *= phase.conj();
        }
        for i in 0..n {
            q[(i, k)] *= phase;
        }
        r[(k, k)] = C64::new(magnitude, 0.0);
        for i in (k + 1)..n {
            r[(i, k)] = ZERO;
        }
    }
    Ok((ComplexMatrix(q), ComplexMatrix(r)))
}

/// Draws an `n×n` matrix of independent standard complex Gaussians
/// (real and imaginary parts each `N(0, 1/2)`).
///
/// The generator is ChaCha8 seeded through `seed_from_u64(seed)`; entries
/// are drawn in row-major order, real part first. Identical `(n, seed)`
/// pairs give bit-identical output.
pub fn random_ginibre(n: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut entries = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        entries.push(C64::new(re * scale, im * scale));
    }
    ComplexMatrix(DMatrix::from_row_slice(n, n, &entries))
}

/// Haar-distributed unitary from the positive QR of a Ginibre draw.
pub fn random_unitary(n: usize, seed: u64) -> ComplexMatrix {
    let g = random_ginibre(n, seed);
    match qr_positive(&g) {
        Ok((q, _)) => q,
        // A Ginibre draw is singular with probability zero; reseed if it happens.
        Err(_) => random_unitary(n, seed.wrapping_add(0x9e37_79b9_7f4a_7c15)),
    }
}

/// SplitMix64 finalizer, used to derive independent per-trial seeds.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn ensure_square(m: &ComplexMatrix) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        })
    }
}

pub(crate) fn ensure_dim(m: &ComplexMatrix, dim: usize) -> Result<()> {
    if m.rows() == dim && m.cols() == dim {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: format!("{dim}x{dim}"),
            found: format!("{}x{}", m.rows(), m.cols()),
        })
    }
}
