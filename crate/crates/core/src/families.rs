//! The ten classical families: structure operators, adapted bases,
//! membership predicates, regular elements, and seeded samplers.
//!
//! # Layout
//!
//! Paper indices `l ∈ {1, −1, 2, −2, …}` are stored interleaved: index `l`
//! lives in column `2l − 2` and `−l` in column `2l − 1` (0-based). For BII
//! and CII the pairs are grouped in fours, see [`structure_context`].
//!
//! Antilinear operators are stored by their real linear part: the
//! conjugation `J` acts as `x ↦ J·conj(x)` and the anti-conjugation `J̃` as
//! `x ↦ Jt·conj(x)`.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyTag {
    A,
    AI,
    AII,
    AIII,
    B,
    BI,
    BII,
    C,
    CI,
    CII,
}

impl FamilyTag {
    pub const ALL: [FamilyTag; 10] = [
        FamilyTag::A,
        FamilyTag::AI,
        FamilyTag::AII,
        FamilyTag::AIII,
        FamilyTag::B,
        FamilyTag::BI,
        FamilyTag::BII,
        FamilyTag::C,
        FamilyTag::CI,
        FamilyTag::CII,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyTag::A => "A",
            FamilyTag::AI => "AI",
            FamilyTag::AII => "AII",
            FamilyTag::AIII => "AIII",
            FamilyTag::B => "B",
            FamilyTag::BI => "BI",
            FamilyTag::BII => "BII",
            FamilyTag::C => "C",
            FamilyTag::CI => "CI",
            FamilyTag::CII => "CII",
        }
    }

    /// Step between valid dimensions: 1, 2, or 4.
    pub fn dim_step(self) -> usize {
        match self {
            FamilyTag::A | FamilyTag::AI => 1,
            FamilyTag::BII | FamilyTag::CII => 4,
            _ => 2,
        }
    }

    /// Smallest valid dimension.
    pub fn min_dim(self) -> usize {
        self.dim_step().max(2)
    }

    pub fn check_dim(self, n: usize) -> Result<()> {
        if n < 2 {
            return Err(Error::BadDimension {
                family: self,
                constraint: "dimension must be at least 2",
            });
        }
        match self.dim_step() {
            2 if !n.is_multiple_of(2) => Err(Error::BadDimension {
                family: self,
                constraint: "dimension must be even",
            }),
            4 if !n.is_multiple_of(4) => Err(Error::BadDimension {
                family: self,
                constraint: "dimension must be divisible by 4",
            }),
            _ => Ok(()),
        }
    }

    fn relations(self) -> &'static [Relation] {
        use Relation::*;
        match self {
            FamilyTag::A => &[],
            FamilyTag::AI => &[RealForm],
            FamilyTag::AII => &[Quaternionic],
            FamilyTag::AIII => &[Signature],
            FamilyTag::B => &[Orthogonal],
            FamilyTag::BI => &[Orthogonal, Signature],
            FamilyTag::BII => &[Orthogonal, Quaternionic],
            FamilyTag::C => &[Symplectic],
            FamilyTag::CI => &[Symplectic, RealForm],
            FamilyTag::CII => &[Symplectic, Signature],
        }
    }

    /// The operator `Z` and sign `ε` with `X₀ = ε·Z·X₀·Z⁻¹` for the
    /// family's regular elements; `None` for A and AI.
    pub fn sign_rule(self) -> Option<(Operator, f64)> {
        match self {
            FamilyTag::A | FamilyTag::AI => None,
            FamilyTag::B | FamilyTag::BI | FamilyTag::BII => Some((Operator::J, -1.0)),
            FamilyTag::C | FamilyTag::CI | FamilyTag::CII => Some((Operator::Jt, -1.0)),
            FamilyTag::AII => Some((Operator::Jt, 1.0)),
            FamilyTag::AIII => Some((Operator::V, -1.0)),
        }
    }
}

impl fmt::Display for FamilyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        FamilyTag::ALL
            .into_iter()
            .find(|t| t.name() == upper)
            .ok_or_else(|| Error::ConstraintViolation(format!("unknown family '{s}'")))
    }
}

impl Serialize for FamilyTag {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Operator {
    /// Conjugation, `J² = 1`.
    J,
    /// Anti-conjugation, `J̃² = −1`.
    Jt,
    /// Signature, `V² = 1`.
    V,
}

impl Operator {
    fn antilinear(self) -> bool {
        !matches!(self, Operator::V)
    }
}

/// A defining relation of a family's Lie algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Relation {
    /// `xJ = J·conj(x)`
    RealForm,
    /// `xJ̃ = J̃·conj(x)`
    Quaternionic,
    /// `x*V = −Vx`
    Signature,
    /// `x = −J·xᵀ·J⁻¹`
    Orthogonal,
    /// `x = −J̃·xᵀ·J̃⁻¹`
    Symplectic,
}

impl Relation {
    fn name(self) -> &'static str {
        match self {
            Relation::RealForm => "real_form",
            Relation::Quaternionic => "quaternionic",
            Relation::Signature => "signature",
            Relation::Orthogonal => "orthogonal",
            Relation::Symplectic => "symplectic",
        }
    }
}

/// How a basis vector is mapped by a structure operator: column `j` goes to
/// `sign · column(target[j])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pairing {
    pub operator: Operator,
    pub target: Vec<usize>,
    pub sign: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    pub scale: f64,
    /// Informational residuals are reported but never fail a check.
    pub enforced: bool,
}

impl Residual {
    pub fn new(name: impl Into<String>, value: f64, scale: f64) -> Self {
        Self {
            name: name.into(),
            value,
            scale,
            enforced: true,
        }
    }

    pub fn informational(name: impl Into<String>, value: f64, scale: f64) -> Self {
        Self {
            name: name.into(),
            value,
            scale,
            enforced: false,
        }
    }

    /// `value / scale`.
    pub fn normalized(&self) -> f64 {
        self.value / self.scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    pub residuals: Vec<Residual>,
    pub tol: f64,
    pub passed: bool,
}

impl MembershipReport {
    pub fn new(residuals: Vec<Residual>, tol: f64) -> Self {
        let passed = residuals
            .iter()
            .filter(|r| r.enforced)
            .all(|r| r.value <= tol * r.scale);
        Self { residuals, tol, passed }
    }

    pub fn get(&self, name: &str) -> Option<&Residual> {
        self.residuals.iter().find(|r| r.name == name)
    }

    /// Largest enforced `value / scale`, or 0 when nothing is enforced.
    pub fn max_normalized(&self) -> f64 {
        self.residuals
            .iter()
            .filter(|r| r.enforced)
            .map(Residual::normalized)
            .fold(0.0, f64::max)
    }

    /// Appends `other` with every residual name prefixed.
    pub fn extend_prefixed(&mut self, prefix: &str, other: MembershipReport) {
        for mut r in other.residuals {
            r.name = format!("{prefix}.{}", r.name);
            self.residuals.push(r);
        }
        self.passed = self
            .residuals
            .iter()
            .filter(|r| r.enforced)
            .all(|r| r.value <= self.tol * r.scale);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureContext {
    family: FamilyTag,
    dim: usize,
    #[serde(rename = "J")]
    j: Option<ComplexMatrix>,
    #[serde(rename = "Jt")]
    jt: Option<ComplexMatrix>,
    #[serde(rename = "V")]
    v: Option<ComplexMatrix>,
    basis: ComplexMatrix,
    pairings: Vec<Pairing>,
    checks: Vec<Residual>,
}

impl StructureContext {
    pub fn family(&self) -> FamilyTag {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn j(&self) -> Option<&ComplexMatrix> {
        self.j.as_ref()
    }

    pub fn jt(&self) -> Option<&ComplexMatrix> {
        self.jt.as_ref()
    }

    pub fn v(&self) -> Option<&ComplexMatrix> {
        self.v.as_ref()
    }

    pub fn adapted_basis(&self) -> &ComplexMatrix {
        &self.basis
    }

    pub fn pairings(&self) -> &[Pairing] {
        &self.pairings
    }

    /// Construction invariants and their residuals, all below
    /// [`STRUCTURE_TOL`].
    pub fn checks(&self) -> &[Residual] {
        &self.checks
    }

    pub fn operator(&self, op: Operator) -> Option<&ComplexMatrix> {
        match op {
            Operator::J => self.j.as_ref(),
            Operator::Jt => self.jt.as_ref(),
            Operator::V => self.v.as_ref(),
        }
    }

    /// Applies a structure operator to a vector or to each column of a matrix.
    pub fn apply(&self, op: Operator, x: &ComplexMatrix) -> Option<ComplexMatrix> {
        let m = self.operator(op)?;
        Some(if op.antilinear() { m * &x.conj() } else { m * x })
    }

    fn op(&self, op: Operator) -> &ComplexMatrix {
        self.operator(op)
            .expect("operator present for every relation of the family")
    }

    fn pairing(&self, op: Operator) -> Option<&Pairing> {
        self.pairings.iter().find(|p| p.operator == op)
    }

    fn check_dim(&self, m: &ComplexMatrix) -> Result<()> {
        linalg::ensure_dim(m, self.dim)
    }
}

/// Tolerance for the construction invariants of a [`StructureContext`].
pub const STRUCTURE_TOL: f64 = 1e-12;

fn real(n: usize, entries: impl Fn(usize, usize) -> f64) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |i, j| C64::new(entries(i, j), 0.0))
}

/// `±1` signature alternating along the diagonal.
fn alternating_signature(n: usize) -> ComplexMatrix {
    real(n, |i, j| {
        if i != j {
            0.0
        } else if i % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    })
}

/// Rotation `e_a → e_b`, `e_b → −e_a` on each listed pair.
fn rotation(n: usize, pairs: &[(usize, usize)]) -> ComplexMatrix {
    let mut m = vec![0.0; n * n];
    for &(a, b) in pairs {
        m[b * n + a] = 1.0;
        m[a * n + b] = -1.0;
    }
    real(n, |i, j| m[i * n + j])
}

/// Pairing that swaps columns `2l−2 ↔ 2l−1` with sign +1.
fn swap_pairs(n: usize, op: Operator) -> Pairing {
    Pairing {
        operator: op,
        target: (0..n).map(|j| j ^ 1).collect(),
        sign: vec![1.0; n],
    }
}

fn fixed(n: usize, op: Operator) -> Pairing {
    Pairing {
        operator: op,
        target: (0..n).collect(),
        sign: vec![1.0; n],
    }
}

/// `ξ_{±l} = (e_{2l−2} ± i·e_{2l−1})/√2`.
fn complex_pair_basis(n: usize) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(n, n, |i, j| {
        if i / 2 != j / 2 {
            ZERO
        } else if i % 2 == 0 {
            C64::new(s, 0.0)
        } else if j % 2 == 0 {
            C64::new(0.0, s)
        } else {
            C64::new(0.0, -s)
        }
    })
}

/// `ξ̃_l = e_{2l−2}`, `ξ̃_{−l} = −e_{2l−1}`.
fn symplectic_basis(n: usize) -> ComplexMatrix {
    real(n, |i, j| {
        if i != j {
            0.0
        } else if i % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    })
}

/// `f^± = (e^+ ± e^−)/√2` on consecutive slots.
fn signature_basis(n: usize) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    real(n, |i, j| {
        if i / 2 != j / 2 {
            0.0
        } else if i % 2 == 1 && j % 2 == 1 {
            -s
        } else {
            s
        }
    })
}

/// Canonical operators and adapted basis for `family` at dimension `n`.
///
/// | family | J | J̃ | V | basis |
/// |---|---|---|---|---|
/// | A | | | | `e_j` |
/// | AI | `1` | | | `e_j` |
/// | AII, C | | pair rotation | | `ξ̃` |
/// | CI | `1` | pair rotation | | `ξ̃` |
/// | B | `1` | | | `ξ` |
/// | BI | `1` | | alternating | `ξ` |
/// | AIII | `1` | | alternating | `f^±` |
/// | BII | `1` | quad rotation | | `ξ` |
/// | CII | | quad rotation | alternating | `f^±` in quads |
///
/// In BII, `J̃` sends slots `4s−4 → 4s−2` and `4s−3 → 4s−1` (and back with a
/// minus sign), so that `J̃ξ_{±(2s−1)} = ξ_{∓2s}`. In CII, slots
/// `4l−4, 4l−3` carry `e_l^±` and slots `4l−2, 4l−1` carry the partners of
/// index `−l`, whose basis vectors take a minus sign.
pub fn structure_context(family: FamilyTag, n: usize) -> Result<StructureContext> {
    family.check_dim(n)?;
    let identity = ComplexMatrix::identity(n);
    let pairs: Vec<(usize, usize)> = (0..n / 2).map(|l| (2 * l, 2 * l + 1)).collect();
    let quads_bii: Vec<(usize, usize)> = (0..n / 4)
        .flat_map(|s| [(4 * s, 4 * s + 2), (4 * s + 1, 4 * s + 3)])
        .collect();

    let mut j = None;
    let mut jt = None;
    let mut v = None;
    let mut pairings = Vec::new();
    let basis = match family {
        FamilyTag::A => identity,
        FamilyTag::AI => {
            j = Some(identity.clone());
            pairings.push(fixed(n, Operator::J));
            identity
        }
        FamilyTag::AII | FamilyTag::C | FamilyTag::CI => {
            jt = Some(rotation(n, &pairs));
            // J̃ξ̃_l = −ξ̃_{−l}, J̃ξ̃_{−l} = ξ̃_l
            pairings.push(Pairing {
                operator: Operator::Jt,
                target: (0..n).map(|c| c ^ 1).collect(),
                sign: (0..n).map(|c| if c % 2 == 0 { -1.0 } else { 1.0 }).collect(),
            });
            if family == FamilyTag::CI {
                j = Some(identity);
                pairings.push(fixed(n, Operator::J));
            }
            symplectic_basis(n)
        }
        FamilyTag::B | FamilyTag::BI => {
            j = Some(identity);
            pairings.push(swap_pairs(n, Operator::J));
            if family == FamilyTag::BI {
                v = Some(alternating_signature(n));
                pairings.push(swap_pairs(n, Operator::V));
            }
            complex_pair_basis(n)
        }
        FamilyTag::AIII => {
            j = Some(identity);
            v = Some(alternating_signature(n));
            pairings.push(fixed(n, Operator::J));
            pairings.push(swap_pairs(n, Operator::V));
            signature_basis(n)
        }
        FamilyTag::BII => {
            j = Some(identity);
            jt = Some(rotation(n, &quads_bii));
            pairings.push(swap_pairs(n, Operator::J));
            // ξ_{2s−1} → ξ_{−2s}, ξ_{−(2s−1)} → ξ_{2s}, ξ_{2s} → −ξ_{−(2s−1)}, ξ_{−2s} → −ξ_{2s−1}
            let target = (0..n).map(|c| (c & !3) | [3, 2, 1, 0][c % 4]).collect();
            let sign = (0..n).map(|c| if c % 4 < 2 { 1.0 } else { -1.0 }).collect();
            pairings.push(Pairing {
                operator: Operator::Jt,
                target,
                sign,
            });
            complex_pair_basis(n)
        }
        FamilyTag::CII => {
            jt = Some(rotation(n, &quads_bii));
            v = Some(alternating_signature(n));
            // f_l^± → −f_{−l}^±, f_{−l}^± → f_l^±
            let target = (0..n).map(|c| c ^ 2).collect();
            let sign = (0..n).map(|c| if c % 4 < 2 { -1.0 } else { 1.0 }).collect();
            pairings.push(Pairing {
                operator: Operator::Jt,
                target,
                sign,
            });
            pairings.push(swap_pairs(n, Operator::V));
            let f = signature_basis(n);
            ComplexMatrix::from_fn(n, n, |i, c| if c % 4 < 2 { f[(i, c)] } else { -f[(i, c)] })
        }
    };

    let mut ctx = StructureContext {
        family,
        dim: n,
        j,
        jt,
        v,
        basis,
        pairings,
        checks: Vec::new(),
    };
    ctx.checks = construction_checks(&ctx);
    if let Some(bad) = ctx.checks.iter().find(|r| r.value > STRUCTURE_TOL * r.scale) {
        return Err(Error::Internal(format!(
            "{family} context invariant '{}' has residual {:.3e}",
            bad.name, bad.value
        )));
    }
    Ok(ctx)
}

fn construction_checks(ctx: &StructureContext) -> Vec<Residual> {
    let n = ctx.dim;
    let id = ComplexMatrix::identity(n);
    let mut out = Vec::new();
    if let Some(j) = &ctx.j {
        out.push(Residual::new(
            "J_orthogonal",
            (&j.transpose() * j).identity_residual(),
            1.0,
        ));
        out.push(Residual::new(
            "J_squared_is_identity",
            (j * &j.conj()).identity_residual(),
            1.0,
        ));
    }
    if let Some(jt) = &ctx.jt {
        out.push(Residual::new(
            "Jt_orthogonal",
            (&jt.transpose() * jt).identity_residual(),
            1.0,
        ));
        out.push(Residual::new(
            "Jt_squared_is_minus_identity",
            (&(jt * &jt.conj()) + &id).frobenius_norm(),
            1.0,
        ));
    }
    if let Some(v) = &ctx.v {
        let diagonal_sign = (0..n)
            .flat_map(|i| (0..n).map(move |k| (i, k)))
            .map(|(i, k)| {
                let z = v[(i, k)];
                if i == k {
                    (z.norm() - 1.0).abs() + z.im.abs()
                } else {
                    z.norm()
                }
            })
            .fold(0.0, f64::max);
        out.push(Residual::new("V_diagonal_signature", diagonal_sign, 1.0));
        out.push(Residual::new("V_squared_is_identity", (v * v).identity_residual(), 1.0));
    }
    // Antilinear maps with real linear parts commute iff the linear parts do.
    if let (Some(j), Some(jt)) = (&ctx.j, &ctx.jt) {
        out.push(Residual::new(
            "J_commutes_with_Jt",
            j.commutator(jt).frobenius_norm(),
            1.0,
        ));
    }
    if let (Some(j), Some(v)) = (&ctx.j, &ctx.v) {
        out.push(Residual::new(
            "J_preserves_signature_split",
            j.commutator(v).frobenius_norm(),
            1.0,
        ));
    }
    if let (Some(jt), Some(v)) = (&ctx.jt, &ctx.v) {
        out.push(Residual::new(
            "Jt_preserves_signature_split",
            jt.commutator(v).frobenius_norm(),
            1.0,
        ));
    }
    out.push(Residual::new(
        "basis_unitary",
        (&ctx.basis.adjoint() * &ctx.basis).identity_residual(),
        1.0,
    ));
    for p in &ctx.pairings {
        let image = ctx.apply(p.operator, &ctx.basis).expect("paired operator exists");
        let expected = ComplexMatrix::from_fn(n, n, |i, c| ctx.basis[(i, p.target[c])] * p.sign[c]);
        let name = format!("basis_relation_{:?}", p.operator);
        out.push(Residual::new(name, (&image - &expected).frobenius_norm(), 1.0));
    }
    out
}

fn relation_residual(ctx: &StructureContext, rel: Relation, x: &ComplexMatrix) -> f64 {
    match rel {
        Relation::RealForm => {
            let j = ctx.op(Operator::J);
            (&(x * j) - &(j * &x.conj())).frobenius_norm()
        }
        Relation::Quaternionic => {
            let jt = ctx.op(Operator::Jt);
            (&(x * jt) - &(jt * &x.conj())).frobenius_norm()
        }
        Relation::Signature => {
            let v = ctx.op(Operator::V);
            (&(&x.adjoint() * v) + &(v * x)).frobenius_norm()
        }
        Relation::Orthogonal => {
            let j = ctx.op(Operator::J);
            (x + &(&(j * &x.transpose()) * &j.transpose())).frobenius_norm()
        }
        Relation::Symplectic => {
            let jt = ctx.op(Operator::Jt);
            (x + &(&(jt * &x.transpose()) * &jt.transpose())).frobenius_norm()
        }
    }
}

fn group_relation_residual(ctx: &StructureContext, rel: Relation, g: &ComplexMatrix) -> f64 {
    match rel {
        Relation::RealForm => relation_residual(ctx, rel, g),
        Relation::Quaternionic => relation_residual(ctx, rel, g),
        Relation::Signature => {
            let v = ctx.op(Operator::V);
            (&(&(&g.adjoint() * v) * g) - v).frobenius_norm()
        }
        // g⁻¹ = J·gᵀ·J⁻¹  ⇔  g·J·gᵀ = J
        Relation::Orthogonal => {
            let j = ctx.op(Operator::J);
            (&(&(g * j) * &g.transpose()) - j).frobenius_norm()
        }
        Relation::Symplectic => {
            let jt = ctx.op(Operator::Jt);
            (&(&(g * jt) * &g.transpose()) - jt).frobenius_norm()
        }
    }
}

/// Evaluates every defining relation of the family's Lie algebra.
pub fn algebra_membership(ctx: &StructureContext, x: &ComplexMatrix, tol: f64) -> Result<MembershipReport> {
    ctx.check_dim(x)?;
    let scale = 1.0 + x.frobenius_norm();
    let residuals = ctx
        .family
        .relations()
        .iter()
        .map(|&rel| Residual::new(rel.name(), relation_residual(ctx, rel, x), scale))
        .collect();
    Ok(MembershipReport::new(residuals, tol))
}

/// Evaluates the group relations; also logs `‖g − 1‖_F`, which is never
/// enforced at finite dimension.
pub fn group_membership(ctx: &StructureContext, g: &ComplexMatrix, tol: f64) -> Result<MembershipReport> {
    ctx.check_dim(g)?;
    // Invertibility is part of the definition of every group here.
    linalg::inverse(g)?;
    let scale = 1.0 + g.frobenius_norm();
    let mut residuals: Vec<Residual> = ctx
        .family
        .relations()
        .iter()
        .map(|&rel| Residual::new(rel.name(), group_relation_residual(ctx, rel, g), scale))
        .collect();
    residuals.push(Residual::informational(
        "distance_to_identity",
        g.identity_residual(),
        scale,
    ));
    Ok(MembershipReport::new(residuals, tol))
}

/// How the family's coefficients are spread over the adapted basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CoefficientRule {
    /// One value per basis vector, all distinct.
    Distinct,
    /// `α_{−l} = α_l`, distinct across `l`.
    Doubled,
    /// `α_{−l} = −α_l`, nonzero and pairwise `α_l ≠ ±α_k`.
    Opposite,
    /// Groups of four `(a, −a, −a, a)`, nonzero and pairwise `a_s ≠ ±a_t`.
    Quad,
}

fn coefficient_rule(family: FamilyTag) -> CoefficientRule {
    match family {
        FamilyTag::A | FamilyTag::AI => CoefficientRule::Distinct,
        FamilyTag::AII => CoefficientRule::Doubled,
        FamilyTag::BII | FamilyTag::CII => CoefficientRule::Quad,
        _ => CoefficientRule::Opposite,
    }
}

/// Number of free coefficients taken by [`regular_element`].
pub fn coefficient_count(family: FamilyTag, n: usize) -> usize {
    match coefficient_rule(family) {
        CoefficientRule::Distinct => n,
        CoefficientRule::Doubled | CoefficientRule::Opposite => n / 2,
        CoefficientRule::Quad => n / 4,
    }
}

/// `(1, 1/2, 1/3, …)`, which satisfies every family's constraints.
pub fn default_coefficients(ctx: &StructureContext) -> Vec<f64> {
    (1..=coefficient_count(ctx.family, ctx.dim))
        .map(|j| 1.0 / j as f64)
        .collect()
}

/// Eigenvalue attached to each adapted basis vector.
pub fn spread_coefficients(family: FamilyTag, coeffs: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|c| match coefficient_rule(family) {
            CoefficientRule::Distinct => coeffs[c],
            CoefficientRule::Doubled => coeffs[c / 2],
            CoefficientRule::Opposite => {
                if c % 2 == 0 {
                    coeffs[c / 2]
                } else {
                    -coeffs[c / 2]
                }
            }
            CoefficientRule::Quad => {
                let a = coeffs[c / 4];
                if c % 4 == 0 || c % 4 == 3 {
                    a
                } else {
                    -a
                }
            }
        })
        .collect()
}

fn check_coefficients(family: FamilyTag, n: usize, coeffs: &[f64]) -> Result<()> {
    let expected = coefficient_count(family, n);
    if coeffs.len() != expected {
        return Err(Error::ConstraintViolation(format!(
            "family {family} at dimension {n} takes {expected} coefficients, got {}",
            coeffs.len()
        )));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::ConstraintViolation("coefficients must be finite".into()));
    }
    let rule = coefficient_rule(family);
    let signed = matches!(rule, CoefficientRule::Opposite | CoefficientRule::Quad);
    if signed {
        if let Some(pos) = coeffs.iter().position(|&c| c == 0.0) {
            return Err(Error::ConstraintViolation(format!(
                "sign rule α_-l = -α_l makes coefficient {} = 0 a double eigenvalue",
                pos + 1
            )));
        }
    }
    for i in 0..coeffs.len() {
        for k in (i + 1)..coeffs.len() {
            let (a, b) = (coeffs[i], coeffs[k]);
            if a == b || (signed && a == -b) {
                let rule_name = if signed { "α_j ≠ ±α_l" } else { "α_j ≠ α_l" };
                return Err(Error::ConstraintViolation(format!(
                    "distinctness rule {rule_name} fails for coefficients {} and {}",
                    i + 1,
                    k + 1
                )));
            }
        }
    }
    Ok(())
}

/// `X₀ = Σ α_l (·|ξ_l) ξ_l` in the adapted basis with the family's sign and
/// pairing rules applied to `coeffs`.
///
/// AII, BII and CII elements carry doubled eigenvalues by construction and
/// classify as quasi-regular.
pub fn regular_element(ctx: &StructureContext, coeffs: &[f64], check_tol: f64) -> Result<ComplexMatrix> {
    check_coefficients(ctx.family, ctx.dim, coeffs)?;
    let alpha = spread_coefficients(ctx.family, coeffs, ctx.dim);
    let u = &ctx.basis;
    let x0 = (&(u * &ComplexMatrix::from_diagonal(&alpha)) * &u.adjoint()).hermitian_part();
    let report = algebra_membership(ctx, &x0, check_tol)?;
    if !report.passed {
        return Err(Error::Internal(format!(
            "{} regular element fails its own algebra relations (max residual {:.3e})",
            ctx.family,
            report.max_normalized()
        )));
    }
    Ok(x0)
}

/// Tests `x0 = ε·Z·x0·Z⁻¹` for the family's sign operator `Z`.
///
/// The operator identity is cross-checked against the coefficient form
/// `α_{partner(l)} = ε·α_l` read off the adapted basis; the two always agree
/// for inputs diagonal in that basis.
pub fn verify_sign_rule(ctx: &StructureContext, x0: &ComplexMatrix, epsilon: f64) -> Result<bool> {
    ctx.check_dim(x0)?;
    if epsilon != 1.0 && epsilon != -1.0 {
        return Err(Error::ConstraintViolation(format!(
            "epsilon must be +1 or -1, got {epsilon}"
        )));
    }
    let (op, _) = ctx.family.sign_rule().ok_or(Error::NoSignOperator(ctx.family))?;
    let z = ctx.op(op);
    let tol = 1e-10 * (1.0 + x0.frobenius_norm());

    let coords = &(&ctx.basis.adjoint() * x0) * &ctx.basis;
    let off_diagonal = (0..ctx.dim)
        .flat_map(|i| (0..ctx.dim).map(move |k| (i, k)))
        .filter(|(i, k)| i != k)
        .map(|(i, k)| coords[(i, k)].norm_sqr())
        .sum::<f64>()
        .sqrt();
    if off_diagonal > tol {
        return Err(Error::ConstraintViolation(format!(
            "x0 is not diagonal in the adapted basis (off-diagonal mass {off_diagonal:.3e})"
        )));
    }

    // Z·x0·Z⁻¹ as a linear map: Z·conj(x0)·Z⁻¹ for antilinear Z.
    let inner = if op.antilinear() { x0.conj() } else { x0.clone() };
    let conjugated = &(z * &inner) * &z.transpose();
    let by_operator = (x0 - &conjugated.scale_real(epsilon)).frobenius_norm() <= tol;

    let pairing = ctx.pairing(op).expect("sign operator has a pairing");
    let alpha: Vec<C64> = (0..ctx.dim).map(|c| coords[(c, c)]).collect();
    let by_coefficients = (0..ctx.dim).all(|c| {
        let partner = alpha[pairing.target[c]];
        let image = if op.antilinear() { alpha[c].conj() } else { alpha[c] };
        (partner - image * epsilon).norm() <= tol
    });

    if by_operator != by_coefficients {
        return Err(Error::Internal(format!(
            "sign rule disagreement for {}: operator form {by_operator}, coefficient form {by_coefficients}",
            ctx.family
        )));
    }
    Ok(by_operator)
}

fn involution(ctx: &StructureContext, rel: Relation, x: &ComplexMatrix) -> ComplexMatrix {
    match rel {
        Relation::RealForm => {
            let j = ctx.op(Operator::J);
            &(j * &x.conj()) * &j.transpose()
        }
        Relation::Quaternionic => {
            let jt = ctx.op(Operator::Jt);
            &(jt * &x.conj()) * &jt.transpose()
        }
        Relation::Signature => {
            let v = ctx.op(Operator::V);
            -&(&(v * &x.adjoint()) * v)
        }
        Relation::Orthogonal => {
            let j = ctx.op(Operator::J);
            -&(&(j * &x.transpose()) * &j.transpose())
        }
        Relation::Symplectic => {
            let jt = ctx.op(Operator::Jt);
            -&(&(jt * &x.transpose()) * &jt.transpose())
        }
    }
}

/// A seeded element of the family's Lie algebra: a Ginibre draw averaged
/// over the group generated by the family's defining involutions.
pub fn sample_algebra(ctx: &StructureContext, seed: u64) -> Result<ComplexMatrix> {
    let mut x = linalg::random_ginibre(ctx.dim, seed);
    // The involutions of each family commute, so one averaging pass per
    // generator projects onto the common fixed space.
    for &rel in ctx.family.relations() {
        x = (&x + &involution(ctx, rel, &x)).scale_real(0.5);
    }
    let report = algebra_membership(ctx, &x, 1e-10)?;
    if !report.passed {
        return Err(Error::Internal(format!(
            "{} sample fails membership after averaging (max residual {:.3e})",
            ctx.family,
            report.max_normalized()
        )));
    }
    Ok(x)
}

/// `exp(scale · sample_algebra(ctx, seed))`; `scale = 0` yields the identity.
pub fn sample_group(ctx: &StructureContext, seed: u64, scale: f64) -> Result<ComplexMatrix> {
    if !scale.is_finite() {
        return Err(Error::ConstraintViolation(format!("scale must be finite, got {scale}")));
    }
    if scale == 0.0 {
        return Ok(ComplexMatrix::identity(ctx.dim));
    }
    let x = sample_algebra(ctx, seed)?;
    linalg::matrix_exp(&x.scale_real(scale))
}

/// Coefficients of `x0` on the diagonal of the adapted basis.
pub fn adapted_coefficients(ctx: &StructureContext, x0: &ComplexMatrix) -> Result<Vec<C64>> {
    ctx.check_dim(x0)?;
    let coords = &(&ctx.basis.adjoint() * x0) * &ctx.basis;
    Ok((0..ctx.dim).map(|c| coords[(c, c)]).collect())
}

/// `Σ α_c (·|u_c) u_c` for arbitrary per-column values.
pub fn diagonal_in_basis(ctx: &StructureContext, alpha: &[f64]) -> ComplexMatrix {
    let u = &ctx.basis;
    (&(u * &ComplexMatrix::from_diagonal(alpha)) * &u.adjoint()).hermitian_part()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{build_frame, classify, RegularityClass};
    use crate::linalg::ONE;

    fn ctx(f: FamilyTag, n: usize) -> StructureContext {
        structure_context(f, n).unwrap()
    }

    #[test]
    fn tags_parse_case_insensitively() {
        for tag in FamilyTag::ALL {
            assert_eq!(tag.name().to_lowercase().parse::<FamilyTag>().unwrap(), tag);
            assert_eq!(tag.name().parse::<FamilyTag>().unwrap(), tag);
        }
        assert!("D".parse::<FamilyTag>().is_err());
    }

    #[test]
    fn dimension_constraints() {
        assert!(FamilyTag::A.check_dim(3).is_ok());
        assert!(FamilyTag::A.check_dim(1).is_err());
        assert!(FamilyTag::B.check_dim(3).is_err());
        let err = FamilyTag::BII.check_dim(6).unwrap_err();
        assert!(err.to_string().contains("dimension must be divisible by 4"), "{err}");
        assert!(FamilyTag::CII.check_dim(8).is_ok());
    }

    #[test]
    fn every_context_constructs() {
        for tag in FamilyTag::ALL {
            for n in [tag.min_dim(), 8] {
                let c = ctx(tag, n);
                assert!(c.checks().iter().all(|r| r.value <= STRUCTURE_TOL));
            }
        }
    }

    #[test]
    fn b2_basis() {
        let c = ctx(FamilyTag::B, 2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = c.adapted_basis();
        assert_eq!(u[(0, 0)], C64::new(s, 0.0));
        assert_eq!(u[(1, 0)], C64::new(0.0, s));
        assert_eq!(u[(0, 1)], C64::new(s, 0.0));
        assert_eq!(u[(1, 1)], C64::new(0.0, -s));
        // J ξ_1 = ξ_{-1}
        let image = c.apply(Operator::J, &u.leading_columns(1)).unwrap();
        assert!((&image - &u.submatrix(0, 1, 2, 1)).frobenius_norm() < 1e-15);
    }

    #[test]
    fn c2_anticonjugation() {
        let c = ctx(FamilyTag::C, 2);
        assert_eq!(
            c.jt().unwrap(),
            &ComplexMatrix::from_real(2, 2, &[0.0, -1.0, 1.0, 0.0]).unwrap()
        );
    }

    #[test]
    fn aiii2_signature_basis() {
        let c = ctx(FamilyTag::AIII, 2);
        assert_eq!(c.v().unwrap(), &ComplexMatrix::from_diagonal(&[1.0, -1.0]));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(
            c.adapted_basis(),
            &ComplexMatrix::from_real(2, 2, &[s, s, s, -s]).unwrap()
        );
    }

    #[test]
    fn membership_examples() {
        let c = ctx(FamilyTag::AIII, 2);
        let x = ComplexMatrix::from_real(2, 2, &[0.0, 1.5, 1.5, 0.0]).unwrap();
        let report = algebra_membership(&c, &x, 1e-10).unwrap();
        assert_eq!(report.get("signature").unwrap().value, 0.0);

        let c = ctx(FamilyTag::AI, 2);
        let x = ComplexMatrix::new(2, 2, vec![ONE, C64::new(0.0, 0.25), ZERO, ONE]).unwrap();
        let report = algebra_membership(&c, &x, 1e-10).unwrap();
        assert!(!report.passed);
        assert_eq!(report.get("real_form").unwrap().value, 0.5);

        let c = ctx(FamilyTag::A, 2);
        assert!(
            algebra_membership(&c, &linalg::random_ginibre(2, 1), 1e-10)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn identity_in_every_group() {
        for tag in FamilyTag::ALL {
            let c = ctx(tag, 8);
            assert!(
                group_membership(&c, &ComplexMatrix::identity(8), 1e-12).unwrap().passed,
                "{tag}"
            );
        }
    }

    #[test]
    fn singular_group_input() {
        let c = ctx(FamilyTag::A, 2);
        assert!(matches!(
            group_membership(&c, &ComplexMatrix::zeros(2, 2), 1e-8),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn regular_element_examples() {
        let c = ctx(FamilyTag::B, 2);
        let x0 = regular_element(&c, &[1.0], 1e-10).unwrap();
        let eig = linalg::hermitian_eig(&x0, 1e-12).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14 && (eig.values[1] + 1.0).abs() < 1e-14);

        let c = ctx(FamilyTag::AIII, 2);
        let x0 = regular_element(&c, &[0.75], 1e-10).unwrap();
        let expected = ComplexMatrix::from_real(2, 2, &[0.0, 0.75, 0.75, 0.0]).unwrap();
        assert!((&x0 - &expected).frobenius_norm() < 1e-15);

        let c = ctx(FamilyTag::AII, 4);
        let x0 = regular_element(&c, &[2.0, 1.0], 1e-10).unwrap();
        let eig = linalg::hermitian_eig(&x0, 1e-12).unwrap();
        assert_eq!(eig.values, vec![2.0, 2.0, 1.0, 1.0]);
        let frame = build_frame(&x0, 1e-8).unwrap();
        assert_eq!(classify(&frame), RegularityClass::QuasiRegular);
    }

    #[test]
    fn regular_element_classification() {
        for tag in FamilyTag::ALL {
            let c = ctx(tag, 8);
            let x0 = regular_element(&c, &default_coefficients(&c), 1e-10).unwrap();
            let frame = build_frame(&x0, 1e-8).unwrap();
            let expected = match tag {
                FamilyTag::AII | FamilyTag::BII | FamilyTag::CII => RegularityClass::QuasiRegular,
                _ => RegularityClass::Regular,
            };
            assert_eq!(classify(&frame), expected, "{tag}");
        }
    }

    #[test]
    fn regular_element_constraints() {
        let c = ctx(FamilyTag::AIII, 4);
        assert!(matches!(
            regular_element(&c, &[1.0, -1.0], 1e-10),
            Err(Error::ConstraintViolation(_))
        ));
        assert!(matches!(
            regular_element(&c, &[1.0, 0.0], 1e-10),
            Err(Error::ConstraintViolation(_))
        ));
        assert!(matches!(
            regular_element(&c, &[1.0], 1e-10),
            Err(Error::ConstraintViolation(_))
        ));
        let c = ctx(FamilyTag::A, 3);
        assert!(matches!(
            regular_element(&c, &[1.0, 2.0, 1.0], 1e-10),
            Err(Error::ConstraintViolation(_))
        ));
        let c = ctx(FamilyTag::BII, 8);
        assert!(matches!(
            regular_element(&c, &[1.0, -1.0], 1e-10),
            Err(Error::ConstraintViolation(_))
        ));
    }

    #[test]
    fn sign_rule_examples() {
        let c = ctx(FamilyTag::B, 4);
        let x0 = regular_element(&c, &[1.0, 0.5], 1e-10).unwrap();
        assert!(verify_sign_rule(&c, &x0, -1.0).unwrap());
        assert!(!verify_sign_rule(&c, &x0, 1.0).unwrap());
        let broken = diagonal_in_basis(&c, &[1.0, -1.0, 0.5, -0.25]);
        assert!(!verify_sign_rule(&c, &broken, -1.0).unwrap());

        let c = ctx(FamilyTag::AII, 4);
        let x0 = regular_element(&c, &[2.0, 1.0], 1e-10).unwrap();
        assert!(verify_sign_rule(&c, &x0, 1.0).unwrap());

        let c = ctx(FamilyTag::AI, 4);
        assert!(matches!(
            verify_sign_rule(&c, &ComplexMatrix::identity(4), 1.0),
            Err(Error::NoSignOperator(FamilyTag::AI))
        ));
    }

    #[test]
    fn samples_are_deterministic_members() {
        for tag in FamilyTag::ALL {
            let c = ctx(tag, 8);
            let x = sample_algebra(&c, 5).unwrap();
            assert_eq!(x, sample_algebra(&c, 5).unwrap());
            assert!(algebra_membership(&c, &x, 1e-12).unwrap().passed, "{tag}");
            let g = sample_group(&c, 5, 0.3).unwrap();
            assert!(group_membership(&c, &g, 1e-8).unwrap().passed, "{tag}");
        }
    }

    #[test]
    fn zero_scale_is_identity() {
        let c = ctx(FamilyTag::CII, 4);
        assert_eq!(sample_group(&c, 1, 0.0).unwrap(), ComplexMatrix::identity(4));
    }

    #[test]
    fn aiii_group_diagonal_in_f_basis() {
        // diag(2, 1/2) in the f-basis is a hyperbolic boost preserving V.
        let c = ctx(FamilyTag::AIII, 2);
        let g = diagonal_in_basis(&c, &[2.0, 0.5]);
        let v = c.v().unwrap();
        let residual = (&(&(&g.adjoint() * v) * &g) - v).frobenius_norm();
        assert!(residual < 1e-15);
        assert!(group_membership(&c, &g, 1e-12).unwrap().passed);
    }
}
