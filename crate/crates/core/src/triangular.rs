//! Block projections relative to a spectral frame, the triadic splitting of
//! the Lie algebra, and the triangular-truncation growth experiment.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{self, build_frame, SpectralFrame, DEFAULT_CLUSTER_TOL};
use crate::linalg::{self, ComplexMatrix, SchattenP, C64, ZERO};

/// Which blocks of a frame-coordinate matrix survive a projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BlockMask {
    Diagonal,
    /// Blocks on or above the diagonal.
    Upper,
    /// Blocks strictly above the diagonal.
    StrictUpper,
}

impl BlockMask {
    fn keeps(self, bi: usize, bj: usize) -> bool {
        match self {
            BlockMask::Diagonal => bi == bj,
            BlockMask::Upper => bi <= bj,
            BlockMask::StrictUpper => bi < bj,
        }
    }
}

/// Applies `mask` to a matrix already in frame coordinates.
pub(crate) fn mask_frame(frame: &SpectralFrame, zf: &ComplexMatrix, mask: BlockMask) -> ComplexMatrix {
    ComplexMatrix::from_fn(zf.rows(), zf.cols(), |i, j| {
        if mask.keeps(frame.block_of(i), frame.block_of(j)) {
            zf[(i, j)]
        } else {
            ZERO
        }
    })
}

fn project(frame: &SpectralFrame, z: &ComplexMatrix, mask: BlockMask) -> Result<ComplexMatrix> {
    let zf = frame::to_frame(frame, z)?;
    frame::from_frame(frame, &mask_frame(frame, &zf, mask))
}

/// `D(z) = Σ_λ E_λ z E_λ`: keeps the diagonal blocks.
pub fn diag_expectation(frame: &SpectralFrame, z: &ComplexMatrix) -> Result<ComplexMatrix> {
    project(frame, z, BlockMask::Diagonal)
}

/// `T(z)`: keeps blocks on or above the diagonal.
pub fn triangular_projection(frame: &SpectralFrame, z: &ComplexMatrix) -> Result<ComplexMatrix> {
    project(frame, z, BlockMask::Upper)
}

/// `T(z) − D(z)`: keeps blocks strictly above the diagonal.
pub fn strict_upper_projection(frame: &SpectralFrame, z: &ComplexMatrix) -> Result<ComplexMatrix> {
    project(frame, z, BlockMask::StrictUpper)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriadicParts {
    pub k_part: ComplexMatrix,
    pub a_part: ComplexMatrix,
    pub n_part: ComplexMatrix,
}

/// Splits `x` into skew-Hermitian, Hermitian block-diagonal, and strictly
/// upper block-triangular parts:
///
/// ```text
/// k = (1−T)X − ((1−T)X)* + ½(DX − (DX)*)
/// a = ½(DX + (DX)*)
/// n = (T−D)X + ((1−T)X)*
/// ```
pub fn triadic_decompose(frame: &SpectralFrame, x: &ComplexMatrix) -> Result<TriadicParts> {
    let xf = frame::to_frame(frame, x)?;
    let lower = &xf - &mask_frame(frame, &xf, BlockMask::Upper);
    let diag = mask_frame(frame, &xf, BlockMask::Diagonal);
    let strict = mask_frame(frame, &xf, BlockMask::StrictUpper);
    let half = C64::new(0.5, 0.0);

    let lower_adj = lower.adjoint();
    let diag_adj = diag.adjoint();
    let k = &(&lower - &lower_adj) + &(&diag - &diag_adj).scale(half);
    let a = (&diag + &diag_adj).scale(half);
    let n = &strict + &lower_adj;

    Ok(TriadicParts {
        k_part: frame::from_frame(frame, &k)?,
        a_part: frame::from_frame(frame, &a)?,
        n_part: frame::from_frame(frame, &n)?,
    })
}

/// The skew-symmetric matrix `W[j,l] = 1/(j − l)` off the diagonal.
pub fn hilbert_witness(n: usize) -> Result<ComplexMatrix> {
    if n < 2 {
        return Err(Error::InvalidMatrix(format!(
            "witness size must be at least 2, got {n}"
        )));
    }
    // 0-based storage; the difference j − l is unchanged by the index shift.
    Ok(ComplexMatrix::from_fn(n, n, |j, l| {
        if j == l {
            ZERO
        } else {
            C64::new(1.0 / (j as f64 - l as f64), 0.0)
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthRow {
    pub n: usize,
    pub op_norm_w: f64,
    pub op_norm_tw: f64,
    pub ratio_op: f64,
    pub s2_norm_w: f64,
    pub s2_norm_tw: f64,
    pub ratio_s2: f64,
}

/// Norms of `W_n` and its triangular truncation for each size, with `T`
/// taken relative to `X₀ = diag(n, …, 1)`.
///
/// Sizes are evaluated in parallel; rows come back in input order.
pub fn truncation_growth(sizes: &[usize]) -> Result<Vec<GrowthRow>> {
    if sizes.is_empty() {
        return Err(Error::InvalidMatrix("size list is empty".into()));
    }
    if let Some(&bad) = sizes.iter().find(|&&n| n < 2) {
        return Err(Error::InvalidMatrix(format!("sizes must be at least 2, got {bad}")));
    }
    sizes.par_iter().map(|&n| growth_row(n)).collect()
}

fn growth_row(n: usize) -> Result<GrowthRow> {
    let x0 = ComplexMatrix::from_diagonal(&(0..n).map(|i| (n - i) as f64).collect::<Vec<_>>());
    let frame = build_frame(&x0, DEFAULT_CLUSTER_TOL)?;
    let w = hilbert_witness(n)?;
    let tw = triangular_projection(&frame, &w)?;

    let op_norm_w = linalg::operator_norm(&w);
    let op_norm_tw = linalg::operator_norm(&tw);
    let s2_norm_w = linalg::schatten_norm(&w, SchattenP::Finite(2.0));
    let s2_norm_tw = linalg::schatten_norm(&tw, SchattenP::Finite(2.0));
    Ok(GrowthRow {
        n,
        op_norm_w,
        op_norm_tw,
        ratio_op: op_norm_tw / op_norm_w,
        s2_norm_w,
        s2_norm_tw,
        ratio_s2: s2_norm_tw / s2_norm_w,
    })
}

pub const GROWTH_CSV_HEADER: &str = "n,op_norm_W,op_norm_TW,ratio_op,s2_norm_W,s2_norm_TW,ratio_s2";

pub fn growth_csv(rows: &[GrowthRow]) -> String {
    let mut out = String::from(GROWTH_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.n, r.op_norm_w, r.op_norm_tw, r.ratio_op, r.s2_norm_w, r.s2_norm_tw, r.ratio_s2
        ));
    }
    out
}
