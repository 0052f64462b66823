use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

use super::{C64, EPS_ALG, MAX_DIM};

const ZERO: C64 = Complex64 { re: 0.0, im: 0.0 };

/// A square complex matrix acting on a finite-dimensional Hilbert space.
#[derive(Clone, PartialEq)]
pub struct Operator {
    m: DMatrix<C64>,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Operator(dim={})", self.dim())
    }
}

impl Operator {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::arg(format!("operator must be square, got {}x{}", m.nrows(), m.ncols())));
        }
        if m.nrows() == 0 {
            return Err(Error::arg("operator dimension must be positive"));
        }
        if m.nrows() > MAX_DIM {
            return Err(Error::Size { dim: m.nrows(), max: MAX_DIM });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::arg("operator has non-finite entries"));
        }
        Ok(Operator { m })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::arg("rows must form a square matrix"));
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0)))
    }

    pub fn from_complex_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::arg("rows must form a non-empty square matrix"));
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(dim: usize) -> Self {
        Operator { m: DMatrix::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Operator { m: DMatrix::zeros(dim, dim) }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        Operator { m }
    }

    /// `|a⟩⟨b|`
    pub fn outer(a: &PureState, b: &PureState) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::arg("outer product of vectors with different dimensions"));
        }
        Ok(Operator { m: a.vector() * b.vector().adjoint() })
    }

    pub fn projector(v: &PureState) -> Self {
        Operator { m: v.vector() * v.vector().adjoint() }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Operator { m: self.m.adjoint() }
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn scale(&self, s: f64) -> Self {
        Operator { m: &self.m * C64::new(s, 0.0) }
    }

    pub fn add(&self, other: &Operator) -> Result<Self> {
        self.check_same(other)?;
        Ok(Operator { m: &self.m + &other.m })
    }

    pub fn sub(&self, other: &Operator) -> Result<Self> {
        self.check_same(other)?;
        Ok(Operator { m: &self.m - &other.m })
    }

    pub fn mul(&self, other: &Operator) -> Result<Self> {
        self.check_same(other)?;
        Ok(Operator { m: matmul(&self.m, &other.m) })
    }

    pub fn apply(&self, v: &DVector<C64>) -> Result<DVector<C64>> {
        if v.len() != self.dim() {
            return Err(Error::arg(format!(
                "vector of length {} applied to operator of dimension {}",
                v.len(),
                self.dim()
            )));
        }
        let out = matmul(&self.m, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()));
        Ok(DVector::from_column_slice(out.as_slice()))
    }

    /// `A X` for a rectangular `X`, skipping structural zeros.
    pub fn apply_matrix(&self, x: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        if x.nrows() != self.dim() {
            return Err(Error::arg("row count does not match operator dimension"));
        }
        Ok(matmul(&self.m, x))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        operator_norm(&self.m)
    }

    pub fn is_hermitian(&self) -> bool {
        norm_within(&(&self.m - self.m.adjoint()), EPS_ALG)
    }

    pub fn is_unitary(&self) -> bool {
        let n = self.dim();
        let prod = matmul(&self.m.adjoint(), &self.m);
        norm_within(&(prod - DMatrix::identity(n, n)), EPS_ALG)
    }

    pub fn is_projector(&self) -> bool {
        self.is_hermitian() && norm_within(&(matmul(&self.m, &self.m) - &self.m), EPS_ALG)
    }

    /// `⟨a|A|b⟩`
    pub fn matrix_element(&self, a: &PureState, b: &PureState) -> Result<C64> {
        let ab = self.apply(b.vector())?;
        Ok(a.vector().dotc(&ab))
    }

    fn check_same(&self, other: &Operator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::arg(format!("dimension mismatch: {} vs {}", self.dim(), other.dim())));
        }
        Ok(())
    }
}

/// Kronecker product `A ⊗ B`, with `A` the more significant factor.
pub fn tensor_product(a: &Operator, b: &Operator) -> Result<Operator> {
    let dim = a.dim().saturating_mul(b.dim());
    if dim > MAX_DIM {
        return Err(Error::Size { dim, max: MAX_DIM });
    }
    Ok(Operator { m: a.m.kronecker(&b.m) })
}

/// Left-to-right Kronecker product of several factors.
pub fn tensor_all(ops: &[&Operator]) -> Result<Operator> {
    let (first, rest) = ops.split_first().ok_or_else(|| Error::arg("empty tensor product"))?;
    rest.iter().try_fold((*first).clone(), |acc, op| tensor_product(&acc, op))
}

/// `‖AB − BA‖` in operator norm.
pub fn commutator_norm(a: &Operator, b: &Operator) -> Result<f64> {
    a.check_same(b)?;
    Ok(operator_norm(&(matmul(&a.m, &b.m) - matmul(&b.m, &a.m))))
}

/// A normalized vector.
#[derive(Clone, PartialEq)]
pub struct PureState {
    v: DVector<C64>,
}

impl fmt::Debug for PureState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PureState{:?}", self.v.as_slice())
    }
}

impl PureState {
    pub fn new(v: DVector<C64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::arg("state vector must be non-empty"));
        }
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::arg("state vector has non-finite entries"));
        }
        let norm = v.norm();
        if (norm - 1.0).abs() > EPS_ALG {
            return Err(Error::arg(format!("state vector not normalized (norm {norm})")));
        }
        Ok(PureState { v })
    }

    /// Rescales `v` to unit norm.
    pub fn normalized(v: DVector<C64>) -> Result<Self> {
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::arg("cannot normalize a zero or non-finite vector"));
        }
        PureState::new(v / C64::new(norm, 0.0))
    }

    pub fn from_amplitudes(amps: &[C64]) -> Result<Self> {
        PureState::new(DVector::from_column_slice(amps))
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        PureState::new(DVector::from_iterator(amps.len(), amps.iter().map(|&a| C64::new(a, 0.0))))
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index {index} out of range for dimension {dim}");
        let mut v = DVector::zeros(dim);
        v[index] = C64::new(1.0, 0.0);
        PureState { v }
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn vector(&self) -> &DVector<C64> {
        &self.v
    }

    pub fn amplitude(&self, i: usize) -> C64 {
        self.v[i]
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &PureState) -> C64 {
        self.v.dotc(&other.v)
    }

    pub fn fidelity(&self, other: &PureState) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let dim = self.dim() * other.dim();
        if dim > MAX_DIM {
            return Err(Error::Size { dim, max: MAX_DIM });
        }
        Ok(PureState { v: self.v.kronecker(&other.v) })
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::wrap(Operator::projector(self).m)
    }

    /// Same ray with the first non-negligible amplitude made real and positive.
    pub fn with_canonical_phase(&self) -> PureState {
        let pivot = self.v.iter().find(|z| z.norm() > 1e-12).copied();
        match pivot {
            Some(z) => PureState { v: &self.v * (z.conj() / z.norm()) },
            None => self.clone(),
        }
    }
}

/// A positive semidefinite, unit-trace operator.
#[derive(Clone, PartialEq)]
pub struct DensityMatrix {
    m: DMatrix<C64>,
}

impl fmt::Debug for DensityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DensityMatrix(dim={})", self.dim())
    }
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity within `EPS_ALG`.
    pub fn new(op: Operator) -> Result<Self> {
        if !op.is_hermitian() {
            return Err(Error::arg("density matrix is not Hermitian"));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > EPS_ALG || tr.im.abs() > EPS_ALG {
            return Err(Error::arg(format!("density matrix trace {tr} differs from 1")));
        }
        let spec = super::spectral::eigvalsh_unchecked(&op.m);
        if let Some(&min) = spec.first() {
            if min < -EPS_ALG {
                return Err(Error::arg(format!("density matrix has negative eigenvalue {min}")));
            }
        }
        Ok(DensityMatrix { m: hermitize(op.m) })
    }

    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        DensityMatrix::new(Operator::from_matrix(m)?)
    }

    /// Wraps a matrix that is a valid state by construction (CPTP images).
    pub(crate) fn wrap(m: DMatrix<C64>) -> Self {
        DensityMatrix { m: hermitize(m) }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix { m: DMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0) }
    }

    pub fn from_diagonal(probs: &[f64]) -> Result<Self> {
        DensityMatrix::new(Operator::from_diagonal(probs))
    }

    /// `Σ p_i |v_i⟩⟨v_i|`
    pub fn mixture(terms: &[(f64, &PureState)]) -> Result<Self> {
        let dim = terms.first().map(|(_, v)| v.dim()).ok_or_else(|| Error::arg("empty mixture"))?;
        let mut m = DMatrix::zeros(dim, dim);
        for (p, v) in terms {
            if v.dim() != dim {
                return Err(Error::arg("mixture components have different dimensions"));
            }
            m += v.vector() * v.vector().adjoint() * C64::new(*p, 0.0);
        }
        DensityMatrix::from_matrix(m)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn as_operator(&self) -> Operator {
        Operator { m: self.m.clone() }
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    /// `tr[Aρ]`, real part.
    pub fn expectation(&self, op: &Operator) -> Result<f64> {
        if op.dim() != self.dim() {
            return Err(Error::arg("observable dimension does not match state"));
        }
        Ok(trace_product(op.matrix(), &self.m).re)
    }

    pub fn population(&self, v: &PureState) -> Result<f64> {
        if v.dim() != self.dim() {
            return Err(Error::arg("vector dimension does not match state"));
        }
        Ok(v.vector().dotc(&(&self.m * v.vector())).re)
    }

    /// `UρU†`
    pub fn evolve(&self, u: &Operator) -> Result<DensityMatrix> {
        if u.dim() != self.dim() {
            return Err(Error::arg("unitary dimension does not match state"));
        }
        Ok(DensityMatrix::wrap(matmul(&matmul(u.matrix(), &self.m), &u.m.adjoint())))
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        let dim = self.dim() * other.dim();
        if dim > MAX_DIM {
            return Err(Error::Size { dim, max: MAX_DIM });
        }
        Ok(DensityMatrix { m: self.m.kronecker(&other.m) })
    }

    /// Operator-norm distance.
    pub fn distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::arg("dimension mismatch"));
        }
        Ok(operator_norm(&(&self.m - &other.m)))
    }
}

fn hermitize(m: DMatrix<C64>) -> DMatrix<C64> {
    let adj = m.adjoint();
    (m + adj) * C64::new(0.5, 0.0)
}

/// `tr[AB]` without forming the product.
pub(crate) fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            let aik = a[(i, k)];
            if aik != ZERO {
                acc += aik * b[(k, i)];
            }
        }
    }
    acc
}

/// Dense product that skips structural zeros of whichever factor is sparser.
/// Shift and block unitaries are mostly zeros, which makes this dramatically
/// cheaper than a dense kernel for the weight spaces used here.
pub(crate) fn matmul(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let (n, k) = a.shape();
    let (kb, m) = b.shape();
    assert_eq!(k, kb, "inner dimensions differ");
    let av = a.as_slice();
    let bv = b.as_slice();
    let nnz_a = av.iter().filter(|z| **z != ZERO).count();
    let nnz_b = bv.iter().filter(|z| **z != ZERO).count();
    let mut c = DMatrix::<C64>::zeros(n, m);
    let cv = c.as_mut_slice();
    if nnz_b.saturating_mul(n) <= nnz_a.saturating_mul(m) {
        for j in 0..m {
            let ccol = &mut cv[j * n..(j + 1) * n];
            for l in 0..k {
                let blj = bv[j * k + l];
                if blj == ZERO {
                    continue;
                }
                let acol = &av[l * n..(l + 1) * n];
                for (ci, ai) in ccol.iter_mut().zip(acol) {
                    *ci += ai * blj;
                }
            }
        }
    } else {
        for l in 0..k {
            for i in 0..n {
                let ail = av[l * n + i];
                if ail == ZERO {
                    continue;
                }
                for j in 0..m {
                    let blj = bv[j * k + l];
                    if blj != ZERO {
                        cv[j * n + i] += ail * blj;
                    }
                }
            }
        }
    }
    c
}

/// `‖X‖ ≤ eps` in operator norm, deciding cheaply when the entries settle it.
pub(crate) fn norm_within(x: &DMatrix<C64>, eps: f64) -> bool {
    let max = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max > eps {
        return false;
    }
    let n = x.nrows().max(x.ncols()) as f64;
    if max * n <= eps || x.norm() <= eps {
        return true;
    }
    operator_norm(x) <= eps
}

const EXACT_NORM_DIM: usize = 160;

pub(crate) fn operator_norm(x: &DMatrix<C64>) -> f64 {
    if x.iter().all(|z| *z == ZERO) {
        return 0.0;
    }
    if x.nrows().max(x.ncols()) <= EXACT_NORM_DIM {
        return x.clone().singular_values().max();
    }
    power_norm(x)
}

/// Power iteration on `X†X`. Used only above `EXACT_NORM_DIM`.
fn power_norm(x: &DMatrix<C64>) -> f64 {
    let n = x.ncols();
    let mut v = DVector::from_fn(n, |i, _| C64::new(1.0 + (i % 7) as f64 * 0.13, (i % 5) as f64 * 0.29));
    v /= C64::new(v.norm(), 0.0);
    let adj = x.adjoint();
    let mut estimate = 0.0;
    for _ in 0..500 {
        let w = x * &v;
        let next = w.norm();
        let u = &adj * &w;
        let un = u.norm();
        if un == 0.0 {
            return next;
        }
        v = u / C64::new(un, 0.0);
        if (next - estimate).abs() <= 1e-12 * next.max(1e-300) {
            estimate = next;
            break;
        }
        estimate = next;
    }
    // Frobenius/√rank is a valid lower bound; guard against a poor start vector.
    estimate.max(x.norm() / (n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pauli_x() -> Operator {
        Operator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    fn pauli_z() -> Operator {
        Operator::from_diagonal(&[1.0, -1.0])
    }

    #[test]
    fn identity_tensor_identity() {
        let out = tensor_product(&Operator::identity(2), &Operator::identity(3)).unwrap();
        assert_eq!(out, Operator::identity(6));
    }

    #[test]
    fn kronecker_ordering() {
        let ket0 = PureState::basis(2, 0);
        let out = tensor_product(&pauli_z(), &Operator::projector(&ket0)).unwrap();
        assert_eq!(out, Operator::from_diagonal(&[1.0, 0.0, -1.0, 0.0]));
    }

    #[test]
    fn tensor_size_error() {
        let a = Operator::identity(64);
        let b = Operator::identity(65);
        assert!(matches!(tensor_product(&a, &b), Err(Error::Size { dim: 4160, .. })));
    }

    #[test]
    fn commutator_of_paulis() {
        assert_relative_eq!(commutator_norm(&pauli_x(), &pauli_z()).unwrap(), 2.0, epsilon = 1e-12);
        let h = pauli_x().add(&pauli_z()).unwrap();
        assert!(commutator_norm(&h, &h).unwrap() <= EPS_ALG);
        assert!(commutator_norm(&h, &Operator::identity(3)).is_err());
    }

    #[test]
    fn predicates() {
        assert!(pauli_x().is_unitary());
        assert!(pauli_x().is_hermitian());
        assert!(!pauli_x().is_projector());
        assert!(Operator::projector(&PureState::from_real(&[0.6, 0.8]).unwrap()).is_projector());
    }

    #[test]
    fn rejects_non_finite() {
        let m = DMatrix::from_element(2, 2, C64::new(f64::NAN, 0.0));
        assert!(Operator::from_matrix(m).is_err());
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::from_diagonal(&[0.5, 0.6]).is_err());
        assert!(DensityMatrix::from_diagonal(&[1.2, -0.2]).is_err());
        assert!(DensityMatrix::from_diagonal(&[0.25, 0.75]).is_ok());
    }

    #[test]
    fn sparse_and_dense_products_agree() {
        let a = DMatrix::from_fn(5, 5, |i, j| if (i + j) % 3 == 0 { C64::new(i as f64, j as f64 - 1.0) } else { ZERO });
        let b = DMatrix::from_fn(5, 5, |i, j| C64::new((i * j) as f64 * 0.1, 1.0 / (1 + i + j) as f64));
        let expect = &a * &b;
        assert_relative_eq!((matmul(&a, &b) - &expect).norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!((matmul(&b, &a) - &b * &a).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn power_iteration_matches_svd() {
        let n = 200;
        let x = DMatrix::from_fn(n, n, |i, j| C64::new(((i * 31 + j * 17) % 11) as f64 - 5.0, 0.0));
        let exact = x.clone().singular_values().max();
        assert_relative_eq!(power_norm(&x), exact, max_relative = 1e-6);
    }
}
