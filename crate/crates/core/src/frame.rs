//! Spectral frames of Hermitian elements.
//!
//! A frame is the ordered eigenbasis of `X₀` with eigenvalues grouped into
//! clusters, sorted from largest to smallest. "Upper triangular" anywhere in
//! this crate means upper with respect to this descending order.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::json::F17;
use crate::linalg::{self, ComplexMatrix, C64, HERMITIAN_TOL};

pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;

/// Coordinates below this magnitude are ignored when choosing the phase of
/// an eigenvector.
const SIGNIFICANT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cluster {
    pub value: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegularityClass {
    Regular,
    QuasiRegular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrame {
    dim: usize,
    clusters: Vec<Cluster>,
    basis: ComplexMatrix,
    block_offsets: Vec<usize>,
    block_of: Vec<usize>,
    identity_basis: bool,
}

impl SpectralFrame {
    /// Assembles a frame from its clusters and basis, validating every
    /// structural invariant.
    pub fn from_parts(clusters: Vec<Cluster>, basis: ComplexMatrix) -> Result<Self> {
        linalg::ensure_square(&basis)?;
        let dim = basis.rows();
        if clusters.is_empty() || clusters.iter().any(|c| c.multiplicity == 0 || !c.value.is_finite()) {
            return Err(Error::InvalidMatrix(
                "clusters must be non-empty with positive multiplicities".into(),
            ));
        }
        if clusters.windows(2).any(|w| w[0].value <= w[1].value) {
            return Err(Error::InvalidMatrix(
                "cluster values must be strictly decreasing".into(),
            ));
        }
        let total: usize = clusters.iter().map(|c| c.multiplicity).sum();
        if total != dim {
            return Err(Error::FrameMismatch {
                frame: total,
                matrix: dim,
            });
        }
        let defect = (&basis.adjoint() * &basis).identity_residual();
        if defect > 1e-10 {
            return Err(Error::InvalidMatrix(format!(
                "basis is not unitary (residual {defect:.3e})"
            )));
        }
        Ok(Self::assemble(clusters, basis))
    }

    fn assemble(clusters: Vec<Cluster>, basis: ComplexMatrix) -> Self {
        let dim = basis.rows();
        let mut block_offsets = Vec::with_capacity(clusters.len() + 1);
        let mut block_of = Vec::with_capacity(dim);
        let mut offset = 0;
        for (b, c) in clusters.iter().enumerate() {
            block_offsets.push(offset);
            offset += c.multiplicity;
            block_of.extend(std::iter::repeat_n(b, c.multiplicity));
        }
        block_offsets.push(offset);
        let identity_basis = basis.identity_residual() == 0.0;
        Self {
            dim,
            clusters,
            basis,
            block_offsets,
            block_of,
            identity_basis,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn basis(&self) -> &ComplexMatrix {
        &self.basis
    }

    /// Prefix sums of the multiplicities, starting at 0 and ending at `dim`.
    pub fn block_offsets(&self) -> &[usize] {
        &self.block_offsets
    }

    pub fn num_blocks(&self) -> usize {
        self.clusters.len()
    }

    /// Block containing frame coordinate `i`.
    pub fn block_of(&self, i: usize) -> usize {
        self.block_of[i]
    }

    pub fn block_range(&self, b: usize) -> std::ops::Range<usize> {
        self.block_offsets[b]..self.block_offsets[b + 1]
    }

    pub fn has_identity_basis(&self) -> bool {
        self.identity_basis
    }

    /// Cluster values repeated by multiplicity, in frame order.
    pub fn diagonal_values(&self) -> Vec<f64> {
        self.clusters
            .iter()
            .flat_map(|c| std::iter::repeat_n(c.value, c.multiplicity))
            .collect()
    }

    pub(crate) fn check_dim(&self, m: &ComplexMatrix) -> Result<()> {
        linalg::ensure_dim(m, self.dim)
    }
}

/// Eigendecomposition of `x0` with eigenvalues closer than
/// `cluster_tol·(1 + ‖x0‖_F)` merged into a single cluster.
pub fn build_frame(x0: &ComplexMatrix, cluster_tol: f64) -> Result<SpectralFrame> {
    let eig = linalg::hermitian_eig(x0, HERMITIAN_TOL)?;
    let n = x0.rows();
    let gap = cluster_tol * (1.0 + x0.frobenius_norm());

    let mut groups: Vec<std::ops::Range<usize>> = Vec::new();
    let mut start = 0;
    for i in 1..=n {
        if i == n || eig.values[i - 1] - eig.values[i] > gap {
            groups.push(start..i);
            start = i;
        }
    }

    let mut clusters = Vec::with_capacity(groups.len());
    let mut columns: Vec<usize> = Vec::with_capacity(n);
    let mut phases: Vec<C64> = vec![linalg::ONE; n];
    for range in &groups {
        let mean = eig.values[range.clone()].iter().sum::<f64>() / range.len() as f64;
        clusters.push(Cluster {
            value: mean,
            multiplicity: range.len(),
        });

        let mut keyed: Vec<(f64, usize, usize)> = range
            .clone()
            .map(|j| {
                let (row, z) = first_significant(&eig.vectors, j);
                phases[j] = if z.norm() > 0.0 {
                    z.conj() / z.norm()
                } else {
                    linalg::ONE
                };
                (z.norm(), row, j)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        columns.extend(keyed.into_iter().map(|(_, _, j)| j));
    }

    let basis = ComplexMatrix::from_fn(n, n, |i, j| {
        let src = columns[j];
        eig.vectors[(i, src)] * phases[src]
    });
    Ok(SpectralFrame::assemble(clusters, basis))
}

fn first_significant(vectors: &ComplexMatrix, col: usize) -> (usize, C64) {
    (0..vectors.rows())
        .map(|i| (i, vectors[(i, col)]))
        .find(|(_, z)| z.norm() > SIGNIFICANT)
        .unwrap_or((0, vectors[(0, col)]))
}

pub fn classify(frame: &SpectralFrame) -> RegularityClass {
    if frame.clusters.iter().all(|c| c.multiplicity == 1) {
        RegularityClass::Regular
    } else {
        RegularityClass::QuasiRegular
    }
}

/// `basis*·m·basis`.
pub fn to_frame(frame: &SpectralFrame, m: &ComplexMatrix) -> Result<ComplexMatrix> {
    frame.check_dim(m)?;
    if frame.identity_basis {
        return Ok(m.clone());
    }
    Ok(&(&frame.basis.adjoint() * m) * &frame.basis)
}

/// `basis·m·basis*`.
pub fn from_frame(frame: &SpectralFrame, m: &ComplexMatrix) -> Result<ComplexMatrix> {
    frame.check_dim(m)?;
    if frame.identity_basis {
        return Ok(m.clone());
    }
    Ok(&(&frame.basis * m) * &frame.basis.adjoint())
}

#[derive(Serialize, Deserialize)]
struct FrameJson {
    clusters: Vec<(F17, usize)>,
    basis: ComplexMatrix,
}

impl Serialize for SpectralFrame {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        FrameJson {
            clusters: self.clusters.iter().map(|c| (F17(c.value), c.multiplicity)).collect(),
            basis: self.basis.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SpectralFrame {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = FrameJson::deserialize(deserializer)?;
        let clusters = raw
            .clusters
            .into_iter()
            .map(|(v, m)| Cluster {
                value: v.0,
                multiplicity: m,
            })
            .collect();
        SpectralFrame::from_parts(clusters, raw.basis).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_ginibre, random_unitary};

    fn values(frame: &SpectralFrame) -> Vec<(f64, usize)> {
        frame.clusters().iter().map(|c| (c.value, c.multiplicity)).collect()
    }

    #[test]
    fn diagonal_frame_is_identity() {
        let frame = build_frame(&ComplexMatrix::from_diagonal(&[2.0, 1.0]), 1e-8).unwrap();
        assert_eq!(values(&frame), vec![(2.0, 1), (1.0, 1)]);
        assert_eq!(frame.basis(), &ComplexMatrix::identity(2));
        assert!(frame.has_identity_basis());
        assert_eq!(classify(&frame), RegularityClass::Regular);
    }

    #[test]
    fn nearby_eigenvalues_merge() {
        let frame = build_frame(&ComplexMatrix::from_diagonal(&[1.0, 1.0 + 1e-12, 0.0]), 1e-8).unwrap();
        assert_eq!(frame.clusters().len(), 2);
        assert_eq!(frame.clusters()[0].multiplicity, 2);
        assert!((frame.clusters()[0].value - 1.0).abs() < 1e-11);
        assert_eq!(
            frame.clusters()[1],
            Cluster {
                value: 0.0,
                multiplicity: 1
            }
        );
        assert_eq!(classify(&frame), RegularityClass::QuasiRegular);
    }

    #[test]
    fn pauli_x_frame() {
        let x0 = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let frame = build_frame(&x0, 1e-8).unwrap();
        let v = values(&frame);
        assert!((v[0].0 - 1.0).abs() < 1e-14 && (v[1].0 + 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // First significant coordinate is normalized to be real positive.
        let b = frame.basis();
        assert!((b[(0, 0)] - C64::new(s, 0.0)).norm() < 1e-14);
        assert!((b[(1, 0)] - C64::new(s, 0.0)).norm() < 1e-14);
        assert!((b[(0, 1)] - C64::new(s, 0.0)).norm() < 1e-14);
        assert!((b[(1, 1)] + C64::new(s, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn zero_is_quasi_regular() {
        let frame = build_frame(&ComplexMatrix::zeros(3, 3), 1e-8).unwrap();
        assert_eq!(values(&frame), vec![(0.0, 3)]);
        assert_eq!(classify(&frame), RegularityClass::QuasiRegular);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 0.0, 1.0]).unwrap();
        assert!(matches!(build_frame(&m, 1e-8), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn frame_coordinates_diagonalize_x0() {
        let u = random_unitary(6, 4);
        let d = ComplexMatrix::from_diagonal(&[3.0, 3.0, 2.0, 2.0, 2.0, 1.0]);
        let x0 = &(&u * &d) * &u.adjoint();
        let frame = build_frame(&x0, 1e-8).unwrap();
        assert_eq!(
            frame.clusters().iter().map(|c| c.multiplicity).collect::<Vec<_>>(),
            vec![2, 3, 1]
        );
        let xf = to_frame(&frame, &x0).unwrap();
        let expected = ComplexMatrix::from_diagonal(&frame.diagonal_values());
        assert!((&xf - &expected).frobenius_norm() < 1e-10);
        let back = from_frame(&frame, &expected).unwrap();
        assert!((&back - &x0).frobenius_norm() < 1e-10 * (1.0 + x0.frobenius_norm()));
    }

    #[test]
    fn round_trip_is_identity() {
        let u = random_unitary(5, 8);
        let x0 = &(&u * &ComplexMatrix::from_diagonal(&[5.0, 4.0, 3.0, 2.0, 1.0])) * &u.adjoint();
        let frame = build_frame(&x0, 1e-8).unwrap();
        let m = random_ginibre(5, 1);
        let rt = from_frame(&frame, &to_frame(&frame, &m).unwrap()).unwrap();
        assert!((&rt - &m).frobenius_norm() < 1e-12 * (1.0 + m.frobenius_norm()));
    }

    #[test]
    fn dimension_checked() {
        let frame = build_frame(&ComplexMatrix::identity(2), 1e-8).unwrap();
        assert!(matches!(
            to_frame(&frame, &ComplexMatrix::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn frame_json_round_trip() {
        let x0 = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let frame = build_frame(&x0, 1e-8).unwrap();
        let text = serde_json::to_string(&frame).unwrap();
        let back: SpectralFrame = serde_json::from_str(&text).unwrap();
        assert_eq!(frame, back);
    }

    #[test]
    fn from_parts_validates() {
        let basis = ComplexMatrix::identity(2);
        let bad = vec![
            Cluster {
                value: 1.0,
                multiplicity: 1,
            },
            Cluster {
                value: 2.0,
                multiplicity: 1,
            },
        ];
        assert!(SpectralFrame::from_parts(bad, basis.clone()).is_err());
        let short = vec![Cluster {
            value: 1.0,
            multiplicity: 1,
        }];
        assert!(SpectralFrame::from_parts(short, basis).is_err());
    }
}
