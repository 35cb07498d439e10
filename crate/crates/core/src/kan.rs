//! Global factorizations relative to a spectral frame: `g = k·a·n` and the
//! nest factorization `a = (1 + r)*·d·(1 + r)` of positive operators.

use rayon::prelude::*;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::families::{
    self, default_coefficients, group_membership, regular_element, FamilyTag, MembershipReport, Residual,
    StructureContext,
};
use crate::frame::{self, build_frame, classify, RegularityClass, SpectralFrame, DEFAULT_CLUSTER_TOL};
use crate::json::F17;
use crate::linalg::{self, ComplexMatrix, SchattenP, C64, ZERO};
use crate::triangular::{mask_frame, BlockMask};

#[derive(Debug, Clone, PartialEq)]
pub struct KanFactors {
    /// Unitary factor.
    pub k: ComplexMatrix,
    /// Positive factor, block diagonal in frame coordinates.
    pub a: ComplexMatrix,
    /// Unipotent factor, identity plus strictly upper blocks in frame coordinates.
    pub n: ComplexMatrix,
    /// `‖k·a·n − g‖_F`
    pub residual_recon: f64,
    /// `‖k*·k − 1‖_F`
    pub residual_unitary: f64,
}

impl Serialize for KanFactors {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        struct Residuals<'a>(&'a KanFactors);
        impl Serialize for Residuals<'_> {
            fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
                let mut map = serializer.serialize_map(Some(2))?;
                map.serialize_entry("reconstruction", &F17(self.0.residual_recon))?;
                map.serialize_entry("unitarity", &F17(self.0.residual_unitary))?;
                map.end()
            }
        }
        let mut map = serializer.serialize_map(Some(4))?;
        map.serialize_entry("k", &self.k)?;
        map.serialize_entry("a", &self.a)?;
        map.serialize_entry("n", &self.n)?;
        map.serialize_entry("residuals", &Residuals(self))?;
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NestFactors {
    /// Positive, block diagonal in frame coordinates.
    pub d: ComplexMatrix,
    /// Strictly upper block-triangular in frame coordinates, hence nilpotent.
    pub r: ComplexMatrix,
}

impl NestFactors {
    /// `(1 + r)*·d·(1 + r)`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let one_r = &ComplexMatrix::identity(self.r.rows()) + &self.r;
        &(&one_r.adjoint() * &self.d) * &one_r
    }
}

fn check_frame(frame: &SpectralFrame, m: &ComplexMatrix) -> Result<()> {
    linalg::ensure_square(m)?;
    if m.rows() != frame.dim() {
        return Err(Error::FrameMismatch {
            frame: frame.dim(),
            matrix: m.rows(),
        });
    }
    Ok(())
}

/// Block LDL* factorization `a = (1 + r)*·d·(1 + r)` in frame coordinates.
pub fn nest_factor(frame: &SpectralFrame, a: &ComplexMatrix) -> Result<NestFactors> {
    check_frame(frame, a)?;
    let norm = a.frobenius_norm();
    let eig = linalg::hermitian_eig(a, linalg::HERMITIAN_TOL)?;
    let min_eigenvalue = eig.values.last().copied().unwrap_or(0.0);
    if min_eigenvalue <= 1e-12 * norm {
        return Err(Error::NotPositive { min_eigenvalue });
    }

    let af = frame::to_frame(frame, &a.hermitian_part())?;
    let blocks = frame.num_blocks();
    let range = |b: usize| frame.block_range(b);
    let sub = |m: &ComplexMatrix, bi: usize, bj: usize| {
        let (ri, rj) = (range(bi), range(bj));
        m.submatrix(ri.start, rj.start, ri.len(), rj.len())
    };

    let mut d_blocks: Vec<ComplexMatrix> = Vec::with_capacity(blocks);
    // u[i][j] is the (i, j) block of 1 + r for i < j.
    let mut u: Vec<Vec<Option<ComplexMatrix>>> = vec![vec![None; blocks]; blocks];
    for k in 0..blocks {
        let mut dk = sub(&af, k, k);
        for i in 0..k {
            let uik = u[i][k].as_ref().expect("computed in earlier step");
            dk = &dk - &(&(&uik.adjoint() * &d_blocks[i]) * uik);
        }
        let dk = dk.hermitian_part();
        for j in (k + 1)..blocks {
            let mut rhs = sub(&af, k, j);
            for i in 0..k {
                let uik = u[i][k].as_ref().expect("computed in earlier step");
                let uij = u[i][j].as_ref().expect("computed in earlier step");
                rhs = &rhs - &(&(&uik.adjoint() * &d_blocks[i]) * uij);
            }
            u[k][j] = Some(linalg::solve(&dk, &rhs)?);
        }
        d_blocks.push(dk);
    }

    let n = frame.dim();
    let mut d = vec![ZERO; n * n];
    let mut r = vec![ZERO; n * n];
    for bi in 0..blocks {
        let ri = range(bi);
        for (p, i) in ri.clone().enumerate() {
            for (q, j) in ri.clone().enumerate() {
                d[i * n + j] = d_blocks[bi][(p, q)];
            }
        }
        for (bj, block) in u[bi].iter().enumerate().skip(bi + 1) {
            let block = block.as_ref().expect("filled above");
            for (p, i) in ri.clone().enumerate() {
                for (q, j) in range(bj).enumerate() {
                    r[i * n + j] = block[(p, q)];
                }
            }
        }
    }
    let d = ComplexMatrix::new(n, n, d)?;
    let r = ComplexMatrix::new(n, n, r)?;
    Ok(NestFactors {
        d: frame::from_frame(frame, &d)?,
        r: frame::from_frame(frame, &r)?,
    })
}

/// Hermitian square root of a positive semidefinite matrix.
pub fn hermitian_sqrt(p: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = linalg::hermitian_eig(p, linalg::HERMITIAN_TOL)?;
    let roots: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    Ok(&(&eig.vectors * &ComplexMatrix::from_diagonal(&roots)) * &eig.vectors.adjoint())
}

/// Polar decomposition `m = w·p` with `w` unitary and `p` positive.
fn polar(m: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let svd = m.inner().clone().svd(true, true);
    let x = ComplexMatrix::wrap(svd.u.expect("requested"));
    let yh = ComplexMatrix::wrap(svd.v_t.expect("requested"));
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    let w = &x * &yh;
    let p = (&(&yh.adjoint() * &ComplexMatrix::from_diagonal(&sigma)) * &yh).hermitian_part();
    (w, p)
}

/// Factors `g = k·a·n` relative to `frame`.
///
/// In frame coordinates a positive-diagonal Householder QR gives
/// `g = Q·R`; each diagonal block of `R` is then split by polar
/// decomposition so that `a` is positive and `n = a⁻¹·R` is unipotent. For
/// regular frames every block is 1×1 and the polar step is trivial.
pub fn kan_factor(frame: &SpectralFrame, g: &ComplexMatrix) -> Result<KanFactors> {
    check_frame(frame, g)?;
    let gf = frame::to_frame(frame, g)?;
    let (mut q, mut r) = linalg::qr_positive(&gf)?;
    let dim = frame.dim();

    if frame.clusters().iter().any(|c| c.multiplicity > 1) {
        let mut w_full = ComplexMatrix::identity(dim).into_inner();
        for b in 0..frame.num_blocks() {
            let range = frame.block_range(b);
            if range.len() == 1 {
                continue;
            }
            let block = r.submatrix(range.start, range.start, range.len(), range.len());
            let (w, _) = polar(&block);
            w_full
                .view_mut((range.start, range.start), (range.len(), range.len()))
                .copy_from(w.inner());
        }
        let w_full = ComplexMatrix::wrap(w_full);
        q = &q * &w_full;
        r = &w_full.adjoint() * &r;
    }

    let mut af = mask_frame(frame, &r, BlockMask::Diagonal);
    // Diagonal blocks of R are positive by construction; symmetrize away rounding.
    af = af.hermitian_part();
    let nf = unipotent_from(frame, &af, &r)?;

    let k = frame::from_frame(frame, &q)?;
    let a = frame::from_frame(frame, &af)?;
    let n = frame::from_frame(frame, &nf)?;
    let residual_recon = (&(&(&k * &a) * &n) - g).frobenius_norm();
    let residual_unitary = (&k.adjoint() * &k).identity_residual();
    Ok(KanFactors {
        k,
        a,
        n,
        residual_recon,
        residual_unitary,
    })
}

/// `a⁻¹·R` computed block row by block row, with the diagonal blocks set to
/// the identity and everything below them to zero.
fn unipotent_from(frame: &SpectralFrame, af: &ComplexMatrix, r: &ComplexMatrix) -> Result<ComplexMatrix> {
    let dim = frame.dim();
    let mut nf = ComplexMatrix::identity(dim).into_inner();
    for b in 0..frame.num_blocks() {
        let range = frame.block_range(b);
        let end = range.end;
        if end == dim {
            continue;
        }
        let ab = af.submatrix(range.start, range.start, range.len(), range.len());
        let rest = r.submatrix(range.start, end, range.len(), dim - end);
        let solved = linalg::solve(&ab, &rest)?;
        nf.view_mut((range.start, end), (range.len(), dim - end))
            .copy_from(solved.inner());
    }
    Ok(ComplexMatrix::wrap(nf))
}

/// Structural residuals of `f` plus, with `ctx`, group membership of each
/// factor. `tol` applies to every residual relative to its scale.
pub fn verify_kan(
    frame: &SpectralFrame,
    g: &ComplexMatrix,
    f: &KanFactors,
    ctx: Option<&StructureContext>,
    tol: f64,
) -> MembershipReport {
    let failed = |name: &str| Residual::new(name, f64::INFINITY, 1.0);
    let mut residuals = Vec::new();
    let g_scale = 1.0 + g.frobenius_norm();
    match (frame::to_frame(frame, &f.a), frame::to_frame(frame, &f.n)) {
        (Ok(af), Ok(nf)) => {
            let recon = &(&(&f.k * &f.a) * &f.n) - g;
            residuals.push(Residual::new("reconstruction", recon.frobenius_norm(), g_scale));
            residuals.push(Residual::new(
                "unitarity",
                (&f.k.adjoint() * &f.k).identity_residual(),
                1.0,
            ));

            let a_scale = 1.0 + f.a.frobenius_norm();
            let off_block = (&af - &mask_frame(frame, &af, BlockMask::Diagonal)).frobenius_norm();
            residuals.push(Residual::new("a_block_diagonal", off_block, a_scale));
            residuals.push(Residual::new("a_hermitian", af.hermitian_defect(), a_scale));
            let min_eig = linalg::hermitian_eig(&af.hermitian_part(), 1.0)
                .map(|e| e.values.last().copied().unwrap_or(0.0))
                .unwrap_or(f64::NEG_INFINITY);
            let positivity = if min_eig > 0.0 { 0.0 } else { 1.0 - min_eig };
            residuals.push(Residual::new("a_positive", positivity, a_scale));

            let n_scale = 1.0 + f.n.frobenius_norm();
            let strict = mask_frame(frame, &nf, BlockMask::StrictUpper);
            let unipotence = (&(&nf - &strict) - &ComplexMatrix::identity(frame.dim())).frobenius_norm();
            residuals.push(Residual::new("n_unipotent", unipotence, n_scale));
        }
        _ => {
            for name in ["reconstruction", "unitarity", "a_block_diagonal", "n_unipotent"] {
                residuals.push(failed(name));
            }
        }
    }
    let mut report = MembershipReport::new(residuals, tol);
    if let Some(ctx) = ctx {
        for (name, factor) in [("k", &f.k), ("a", &f.a), ("n", &f.n)] {
            let sub = group_membership(ctx, factor, tol)
                .unwrap_or_else(|_| MembershipReport::new(vec![failed("invertible")], tol));
            report.extend_prefixed(name, sub);
        }
    }
    report
}

/// Refactors `b = a·n` in the reverse order `b = n′·a′`.
///
/// In frame coordinates `b` is upper block-triangular with diagonal blocks
/// those of `a`, so `a′ = D(b)` and `n′ = b·a′⁻¹`.
pub fn reverse_factor(frame: &SpectralFrame, b: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    check_frame(frame, b)?;
    let bf = frame::to_frame(frame, b)?;
    let a_prime = mask_frame(frame, &bf, BlockMask::Diagonal);
    // n′ = b·a′⁻¹  ⇔  a′*·n′* = b*
    let n_prime = linalg::solve(&a_prime.adjoint(), &bf.adjoint())?.adjoint();
    Ok((frame::from_frame(frame, &n_prime)?, frame::from_frame(frame, &a_prime)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosureSummary {
    pub family: FamilyTag,
    pub dim: usize,
    pub trials: usize,
    pub regularity: RegularityClass,
    /// Largest `value / scale` across trials for each residual of
    /// [`verify_kan`], in report order.
    pub max_residuals: Vec<(String, f64)>,
    /// Largest relative `‖a·n − n′·a′‖_F` across trials.
    pub swap_residual: f64,
    /// Largest relative `‖n′ − a·n·a⁻¹‖_F` across trials.
    pub swap_conjugation: f64,
    /// Largest `n′` unipotence residual across trials.
    pub swap_unipotent: f64,
}

impl ClosureSummary {
    pub fn max_membership(&self) -> f64 {
        self.max_residuals.iter().map(|(_, v)| *v).fold(0.0, f64::max)
    }

    pub fn residual(&self, name: &str) -> Option<f64> {
        self.max_residuals.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

struct TrialOutcome {
    residuals: Vec<(String, f64)>,
    swap: f64,
    conjugation: f64,
    unipotent: f64,
}

/// Tolerance of the closure harness.
pub const CLOSURE_TOL: f64 = 1e-8;

/// Samples `trials` group elements of `family`, factors each relative to the
/// frame of the family's default regular element, and records the worst
/// residuals. Trial `t` uses seed [`linalg::mix_seed`]`(seed, t)`.
pub fn closure_study(family: FamilyTag, n: usize, trials: usize, seed: u64) -> Result<ClosureSummary> {
    if trials == 0 {
        return Err(Error::ConstraintViolation("trials must be positive".into()));
    }
    let ctx = families::structure_context(family, n)?;
    let x0 = regular_element(&ctx, &default_coefficients(&ctx), linalg::RESIDUAL_TOL)?;
    let frame = build_frame(&x0, DEFAULT_CLUSTER_TOL)?;
    let scale = 1.0 / (n as f64).sqrt();

    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let g = families::sample_group(&ctx, linalg::mix_seed(seed, t as u64), scale)?;
            let f = kan_factor(&frame, &g)?;
            let report = verify_kan(&frame, &g, &f, Some(&ctx), CLOSURE_TOL);
            let residuals = report
                .residuals
                .iter()
                .filter(|r| r.enforced)
                .map(|r| (r.name.clone(), r.normalized()))
                .collect();

            let b = &f.a * &f.n;
            let (n_prime, a_prime) = reverse_factor(&frame, &b)?;
            let b_scale = 1.0 + b.frobenius_norm();
            let swap = (&b - &(&n_prime * &a_prime)).frobenius_norm() / b_scale;
            let conj = &(&f.a * &f.n) * &linalg::inverse(&f.a)?;
            let conjugation = (&n_prime - &conj).frobenius_norm() / (1.0 + conj.frobenius_norm());
            let npf = frame::to_frame(&frame, &n_prime)?;
            let strict = mask_frame(&frame, &npf, BlockMask::StrictUpper);
            let unipotent =
                (&(&npf - &strict) - &ComplexMatrix::identity(n)).frobenius_norm() / (1.0 + n_prime.frobenius_norm());
            Ok(TrialOutcome {
                residuals,
                swap,
                conjugation,
                unipotent,
            })
        })
        .collect::<Result<_>>()?;

    let mut max_residuals: Vec<(String, f64)> = Vec::new();
    for outcome in &outcomes {
        for (name, value) in &outcome.residuals {
            match max_residuals.iter_mut().find(|(n, _)| n == name) {
                Some(entry) => entry.1 = entry.1.max(*value),
                None => max_residuals.push((name.clone(), *value)),
            }
        }
    }
    let fold = |f: fn(&TrialOutcome) -> f64| outcomes.iter().map(f).fold(0.0, f64::max);
    Ok(ClosureSummary {
        family,
        dim: n,
        trials,
        regularity: classify(&frame),
        max_residuals,
        swap_residual: fold(|o| o.swap),
        swap_conjugation: fold(|o| o.conjugation),
        swap_unipotent: fold(|o| o.unipotent),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergencePoint {
    pub rank: usize,
    pub err_k: f64,
    pub err_a: f64,
    pub err_n: f64,
}

/// Convergence of the factors of the compressions `P_r·g·P_r + (1 − P_r)`
/// towards the factors of `g`, with `X₀` the default regular element of
/// `ctx` and `P_r` the projection onto the first `r` adapted basis vectors.
pub fn truncation_convergence(
    ctx: &StructureContext,
    g: &ComplexMatrix,
    ranks: &[usize],
    p: SchattenP,
) -> Result<Vec<ConvergencePoint>> {
    let x0 = regular_element(ctx, &default_coefficients(ctx), linalg::RESIDUAL_TOL)?;
    truncation_convergence_with(ctx, &x0, g, ranks, p)
}

/// [`truncation_convergence`] for an explicit `x0`, which must be diagonal
/// in the adapted basis so that each compression of `x0` is again regular.
pub fn truncation_convergence_with(
    ctx: &StructureContext,
    x0: &ComplexMatrix,
    g: &ComplexMatrix,
    ranks: &[usize],
    p: SchattenP,
) -> Result<Vec<ConvergencePoint>> {
    let n = ctx.dim();
    linalg::ensure_dim(g, n)?;
    linalg::ensure_dim(x0, n)?;
    if ranks.is_empty() || ranks.windows(2).any(|w| w[0] >= w[1]) || ranks[0] == 0 {
        return Err(Error::ConstraintViolation(
            "ranks must be positive and strictly increasing".into(),
        ));
    }
    if *ranks.last().expect("non-empty") != n {
        return Err(Error::ConstraintViolation(format!(
            "ranks must end at the full dimension {n}"
        )));
    }

    let full = kan_factor(&build_frame(x0, DEFAULT_CLUSTER_TOL)?, g)?;
    let basis = ctx.adapted_basis();
    let identity = ComplexMatrix::identity(n);

    ranks
        .iter()
        .map(|&r| {
            let ur = basis.leading_columns(r);
            let urh = ur.adjoint();
            let frame_r = build_frame(&(&(&urh * x0) * &ur).hermitian_part(), DEFAULT_CLUSTER_TOL)?;
            let g_r = &(&urh * g) * &ur;
            let f = kan_factor(&frame_r, &g_r).map_err(|e| match e {
                Error::Singular { .. } => Error::SingularCompression { rank: r },
                other => other,
            })?;
            let complement = &identity - &(&ur * &urh);
            let embed = |m: &ComplexMatrix| &(&(&ur * m) * &urh) + &complement;
            Ok(ConvergencePoint {
                rank: r,
                err_k: linalg::schatten_norm(&(&embed(&f.k) - &full.k), p),
                err_a: linalg::schatten_norm(&(&embed(&f.a) - &full.a), p),
                err_n: linalg::schatten_norm(&(&embed(&f.n) - &full.n), p),
            })
        })
        .collect()
}

pub const CONVERGENCE_CSV_HEADER: &str = "rank,err_k,err_a,err_n";

pub fn convergence_csv(points: &[ConvergencePoint]) -> String {
    let mut out = String::from(CONVERGENCE_CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e}\n",
            p.rank, p.err_k, p.err_a, p.err_n
        ));
    }
    out
}

/// `|det g|` and `det a`, which agree for any KAN factorization.
pub fn determinant_check(g: &ComplexMatrix, f: &KanFactors) -> Result<(f64, f64)> {
    let det_g = linalg::determinant(g)?.norm();
    let det_a: C64 = linalg::determinant(&f.a)?;
    Ok((det_g, det_a.re))
}
