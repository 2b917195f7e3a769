//! Dense many-body spin operators built from Pauli strings.
//!
//! Basis convention: site 0 is the most significant bit of the basis index,
//! so `Z` on site 0 of a two-site system is `diag(1, 1, -1, -1)`. A set bit
//! means spin down (`Z = -1`).

use std::ops::{Add, Deref, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Default cap on the number of sites a dense operator may span.
pub const DEFAULT_MAX_SITES: usize = 12;
/// Absolute ceiling, even with an explicit override.
pub const HARD_MAX_SITES: usize = 14;

/// Relative entrywise tolerance used when a matrix must be Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliLabel {
    I,
    X,
    Y,
    Z,
}

impl PauliLabel {
    pub fn matrix(self) -> DMatrix<C64> {
        match self {
            PauliLabel::I => DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ONE]),
            PauliLabel::X => DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
            PauliLabel::Y => DMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
            PauliLabel::Z => DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        }
    }

    /// Action on a single bit: returns the flipped-or-not output bit and the phase.
    #[inline]
    fn act(self, bit: bool) -> (bool, C64) {
        match (self, bit) {
            (PauliLabel::I, b) => (b, ONE),
            (PauliLabel::X, b) => (!b, ONE),
            (PauliLabel::Y, false) => (true, I),
            (PauliLabel::Y, true) => (false, -I),
            (PauliLabel::Z, false) => (false, ONE),
            (PauliLabel::Z, true) => (true, -ONE),
        }
    }
}

/// A coefficient times a tensor product of Pauli matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    coefficient: C64,
    labels: Vec<(usize, PauliLabel)>,
    sites: usize,
}

impl PauliTerm {
    pub fn new(sites: usize, coefficient: C64, labels: &[(usize, PauliLabel)]) -> Result<Self> {
        if sites == 0 {
            return Err(Error::InvalidOperator(
                "system size must be positive".into(),
            ));
        }
        let mut sorted: Vec<(usize, PauliLabel)> = labels.to_vec();
        sorted.sort_by_key(|&(site, _)| site);
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidOperator(format!("duplicate site {}", w[0].0)));
            }
        }
        if let Some(&(site, _)) = sorted.last() {
            if site >= sites {
                return Err(Error::IndexOutOfRange {
                    what: "site",
                    index: site,
                    len: sites,
                });
            }
        }
        Ok(Self {
            coefficient,
            labels: sorted,
            sites,
        })
    }

    /// Real-coefficient shorthand.
    pub fn real(sites: usize, coefficient: f64, labels: &[(usize, PauliLabel)]) -> Result<Self> {
        Self::new(sites, C64::new(coefficient, 0.0), labels)
    }

    pub fn coefficient(&self) -> C64 {
        self.coefficient
    }

    pub fn labels(&self) -> &[(usize, PauliLabel)] {
        &self.labels
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            coefficient: self.coefficient * factor,
            ..self.clone()
        }
    }

    /// Maps basis index `col` to `(row, amplitude)` such that the term's
    /// matrix has exactly that single non-zero entry in column `col`.
    fn column_entry(&self, col: usize) -> (usize, C64) {
        let mut row = col;
        let mut amp = self.coefficient;
        for &(site, label) in &self.labels {
            let shift = self.sites - 1 - site;
            let bit = (col >> shift) & 1 == 1;
            let (out, phase) = label.act(bit);
            if out != bit {
                row ^= 1 << shift;
            }
            amp *= phase;
        }
        (row, amp)
    }
}

/// A sum of Pauli terms on a common number of sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSum {
    sites: usize,
    terms: Vec<PauliTerm>,
}

impl OperatorSum {
    pub fn new(sites: usize) -> Self {
        Self {
            sites,
            terms: Vec::new(),
        }
    }

    pub fn from_terms(sites: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        let mut sum = Self::new(sites);
        for t in terms {
            sum.push(t)?;
        }
        Ok(sum)
    }

    pub fn push(&mut self, term: PauliTerm) -> Result<()> {
        if term.sites != self.sites {
            return Err(Error::DimensionMismatch {
                expected: self.sites,
                found: term.sites,
            });
        }
        self.terms.push(term);
        Ok(())
    }

    /// Adds `coefficient * label_1 ⊗ label_2 ⊗ ...`.
    pub fn add(&mut self, coefficient: f64, labels: &[(usize, PauliLabel)]) -> Result<()> {
        self.push(PauliTerm::real(self.sites, coefficient, labels)?)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let f = C64::new(factor, 0.0);
        Self {
            sites: self.sites,
            terms: self.terms.iter().map(|t| t.scaled(f)).collect(),
        }
    }

    /// Concatenation of the terms of `self` and `other`.
    pub fn plus(&self, other: &OperatorSum) -> Result<Self> {
        if other.sites != self.sites {
            return Err(Error::DimensionMismatch {
                expected: self.sites,
                found: other.sites,
            });
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Self {
            sites: self.sites,
            terms,
        })
    }
}

/// Dense complex square operator of dimension `2^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix(DMatrix<C64>);

impl OperatorMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidOperator(format!(
                "matrix is {}x{}, not square",
                m.nrows(),
                m.ncols()
            )));
        }
        if !m.nrows().is_power_of_two() {
            return Err(Error::InvalidOperator(format!(
                "dimension {} is not a power of two",
                m.nrows()
            )));
        }
        Ok(Self(m))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Self::new(DMatrix::from_diagonal(&d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn sites(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(&self.0 * C64::new(factor, 0.0))
    }

    pub fn scale_complex(&self, factor: C64) -> Self {
        Self(&self.0 * factor)
    }

    /// `self + factor * other`, in place.
    pub fn add_scaled(&mut self, factor: f64, other: &OperatorMatrix) {
        let f = C64::new(factor, 0.0);
        self.0.zip_apply(&other.0, |a, b| *a += f * b);
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Hermitian to within `tol` relative to the largest entry.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol * self.max_abs().max(1.0)
    }

    /// Largest entrywise difference between two operators.
    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn apply(&self, psi: &QuantumState) -> DVector<C64> {
        &self.0 * &psi.0
    }

    /// `<psi|self|psi>`; real part for Hermitian operators.
    pub fn expectation(&self, psi: &QuantumState) -> C64 {
        psi.0.dotc(&(&self.0 * &psi.0))
    }

    /// Hilbert-Schmidt inner product `tr(self^† other)`.
    pub fn hs_inner(&self, other: &OperatorMatrix) -> C64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

impl Deref for OperatorMatrix {
    type Target = DMatrix<C64>;
    fn deref(&self) -> &DMatrix<C64> {
        &self.0
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix(&self.0 * &rhs.0)
    }
}

/// Unit-norm complex amplitude vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumState(DVector<C64>);

impl QuantumState {
    /// Wraps `v` after normalizing it.
    pub fn normalized(v: DVector<C64>) -> Result<Self> {
        let n = v.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidOperator(
                "cannot normalize a zero vector".into(),
            ));
        }
        if !v.len().is_power_of_two() {
            return Err(Error::InvalidOperator(format!(
                "state length {} is not a power of two",
                v.len()
            )));
        }
        Ok(Self(v / C64::new(n, 0.0)))
    }

    /// Wraps `v` as-is; the caller vouches for its norm.
    pub fn from_vector_unchecked(v: DVector<C64>) -> Self {
        Self(v)
    }

    /// Computational basis state `|index>`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange {
                what: "basis state",
                index,
                len: dim,
            });
        }
        let mut v = DVector::zeros(dim);
        v[index] = ONE;
        Self::normalized(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn overlap(&self, other: &QuantumState) -> C64 {
        self.0.dotc(&other.0)
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &QuantumState) -> f64 {
        self.overlap(other).norm_sqr()
    }

    pub fn as_slice(&self) -> &[C64] {
        self.0.as_slice()
    }

    pub fn into_inner(self) -> DVector<C64> {
        self.0
    }
}

impl Deref for QuantumState {
    type Target = DVector<C64>;
    fn deref(&self) -> &DVector<C64> {
        &self.0
    }
}

/// Options for turning Pauli sums into dense matrices.
#[derive(Debug, Clone, Copy)]
pub struct MaterializeOptions {
    pub max_sites: usize,
}

impl Default for MaterializeOptions {
    fn default() -> Self {
        Self {
            max_sites: DEFAULT_MAX_SITES,
        }
    }
}

/// Dense matrix `Σ coeff · ⊗ σ`, identity on unlisted sites.
pub fn materialize(sum: &OperatorSum) -> Result<OperatorMatrix> {
    materialize_with(sum, MaterializeOptions::default())
}

pub fn materialize_with(sum: &OperatorSum, opts: MaterializeOptions) -> Result<OperatorMatrix> {
    let cap = opts.max_sites.min(HARD_MAX_SITES);
    if sum.sites > cap {
        return Err(Error::SizeLimit {
            sites: sum.sites,
            cap,
        });
    }
    let dim = 1usize << sum.sites;
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for term in &sum.terms {
        for col in 0..dim {
            let (row, amp) = term.column_entry(col);
            m[(row, col)] += amp;
        }
    }
    OperatorMatrix::new(m)
}

/// `ab - ba`.
pub fn commutator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(OperatorMatrix(&a.0 * &b.0 - &b.0 * &a.0))
}

/// Spectrum and orthonormal eigenvectors of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    /// Ascending.
    pub energies: Vec<f64>,
    /// Column `n` is the eigenvector of `energies[n]`.
    pub vectors: DMatrix<C64>,
}

impl Eigensystem {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn state(&self, n: usize) -> QuantumState {
        QuantumState::from_vector_unchecked(self.vectors.column(n).into_owned())
    }

    /// `V^† op V`.
    pub fn to_eigenbasis(&self, op: &OperatorMatrix) -> DMatrix<C64> {
        self.vectors.adjoint() * &op.0 * &self.vectors
    }

    /// `V m V^†`.
    pub fn from_eigenbasis(&self, m: &DMatrix<C64>) -> OperatorMatrix {
        OperatorMatrix(&self.vectors * m * self.vectors.adjoint())
    }

    /// Spectral norm (largest |E|).
    pub fn spectral_norm(&self) -> f64 {
        self.energies.iter().fold(0.0, |m, e| m.max(e.abs()))
    }
}

/// Hermitian eigendecomposition with ascending energies and a fixed phase
/// convention: each eigenvector's largest-magnitude component is real positive.
pub fn eigendecompose(h: &OperatorMatrix) -> Result<Eigensystem> {
    let defect = h.hermiticity_defect();
    if defect > HERMITIAN_TOL * h.max_abs().max(1.0) {
        return Err(Error::NotHermitian { deviation: defect });
    }
    // Symmetrize so the solver sees an exactly Hermitian input.
    let sym = (&h.0 + h.0.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let dim = h.dim();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut vectors = DMatrix::<C64>::zeros(dim, dim);
    let mut energies = Vec::with_capacity(dim);
    for (col, &src) in order.iter().enumerate() {
        energies.push(eig.eigenvalues[src]);
        let v = eig.eigenvectors.column(src);
        let max_mag = v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let pivot = v
            .iter()
            .position(|z| z.norm() >= max_mag * (1.0 - 1e-9))
            .unwrap_or(0);
        let phase = v[pivot].conj() / v[pivot].norm();
        let norm = v.norm();
        for r in 0..dim {
            vectors[(r, col)] = v[r] * phase / norm;
        }
    }
    Ok(Eigensystem { energies, vectors })
}

/// Unitary `exp(-i dt h)` of a Hermitian operator via its eigendecomposition.
pub fn unitary_step(h: &OperatorMatrix, dt: f64) -> Result<DMatrix<C64>> {
    let eig = eigendecompose(h)?;
    let dim = h.dim();
    let mut scaled = eig.vectors.clone();
    for (c, &e) in eig.energies.iter().enumerate() {
        let phase = C64::from_polar(1.0, -e * dt);
        for r in 0..dim {
            scaled[(r, c)] *= phase;
        }
    }
    Ok(scaled * eig.vectors.adjoint())
}

/// Convenience: the Pauli sum `coefficient * Σ_i label_i` over every site.
pub fn uniform_field(sites: usize, coefficient: f64, label: PauliLabel) -> Result<OperatorSum> {
    let mut sum = OperatorSum::new(sites);
    for i in 0..sites {
        sum.add(coefficient, &[(i, label)])?;
    }
    Ok(sum)
}
