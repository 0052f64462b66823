use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::layout::split_indices;
use super::operator::{matmul, DensityMatrix, Operator, PureState};
use super::spectral::{eigh_unchecked, eigvalsh_unchecked, entropy_of_spectrum};
use super::{c, C64, EPS_ALG, EPS_EIG, MAX_DIM, MAX_FACTORED_DIM};

/// A state stored as `ρ = F F†` with `F` of shape `dim × rank`.
///
/// Weight states of the oscillator constructions are tall and thin: a pure
/// flat superposition stays rank one under shifts and picks up at most the
/// system dimension in rank after a branch unitary. Entropy only needs the
/// small Gram matrix `F†F`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactoredState {
    f: DMatrix<C64>,
}

impl FactoredState {
    /// Validates unit trace.
    pub fn new(f: DMatrix<C64>) -> Result<Self> {
        if f.nrows() == 0 || f.ncols() == 0 {
            return Err(Error::arg("factored state must be non-empty"));
        }
        if f.nrows() > MAX_FACTORED_DIM {
            return Err(Error::Size { dim: f.nrows(), max: MAX_FACTORED_DIM });
        }
        if f.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::arg("factored state has non-finite entries"));
        }
        let tr = f.norm_squared();
        if (tr - 1.0).abs() > EPS_ALG {
            return Err(Error::arg(format!("factored state trace {tr} differs from 1")));
        }
        Ok(FactoredState { f })
    }

    pub fn from_pure(psi: &PureState) -> Self {
        FactoredState { f: DMatrix::from_column_slice(psi.dim(), 1, psi.vector().as_slice()) }
    }

    /// Square-root factor from the eigendecomposition, dropping null directions.
    pub fn from_density(rho: &DensityMatrix) -> Self {
        let spec = eigh_unchecked(rho.matrix());
        let cols: Vec<DVector<C64>> = spec
            .values
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > EPS_EIG)
            .map(|(k, &p)| spec.vectors.column(k) * c(p.sqrt()))
            .collect();
        if cols.is_empty() {
            // Only reachable for a numerically zero matrix, which a valid state is not.
            return FactoredState { f: DMatrix::zeros(rho.dim(), 1) };
        }
        FactoredState { f: DMatrix::from_columns(&cols) }
    }

    /// `Σ p_k F_k F_k†` as a block factor `[√p_1 F_1 | √p_2 F_2 | …]`.
    pub fn mixture(terms: &[(f64, &FactoredState)]) -> Result<Self> {
        let dim = terms.first().map(|(_, s)| s.dim()).ok_or_else(|| Error::arg("empty mixture"))?;
        let mut cols = Vec::new();
        for (p, s) in terms {
            if s.dim() != dim {
                return Err(Error::arg("mixture components have different dimensions"));
            }
            if *p < -EPS_ALG {
                return Err(Error::arg(format!("negative mixture weight {p}")));
            }
            if *p <= 0.0 {
                continue;
            }
            for col in s.f.column_iter() {
                cols.push(col * c(p.sqrt()));
            }
        }
        if cols.is_empty() {
            return Err(Error::arg("mixture has no positive weight"));
        }
        FactoredState::new(DMatrix::from_columns(&cols)).map(|s| s.compressed())
    }

    pub fn dim(&self) -> usize {
        self.f.nrows()
    }

    pub fn rank_bound(&self) -> usize {
        self.f.ncols()
    }

    pub fn factor(&self) -> &DMatrix<C64> {
        &self.f
    }

    pub fn trace(&self) -> f64 {
        self.f.norm_squared()
    }

    /// Eigenvalues of `ρ` restricted to its support bound, ascending.
    pub fn spectrum(&self) -> Vec<f64> {
        if self.f.ncols() <= self.f.nrows() {
            eigvalsh_unchecked(&(self.f.adjoint() * &self.f))
        } else {
            eigvalsh_unchecked(&(&self.f * self.f.adjoint()))
        }
    }

    pub fn entropy(&self) -> f64 {
        entropy_of_spectrum(&self.spectrum())
    }

    /// `tr[Hρ]` for a diagonal `H` given by its entries.
    pub fn diagonal_expectation(&self, energies: &[f64]) -> Result<f64> {
        if energies.len() != self.dim() {
            return Err(Error::arg("energy list length does not match state dimension"));
        }
        Ok(self.f.row_iter().zip(energies).map(|(row, &e)| e * row.norm_squared()).sum())
    }

    pub fn expectation(&self, h: &Operator) -> Result<f64> {
        if h.dim() != self.dim() {
            return Err(Error::arg("observable dimension does not match state"));
        }
        let hf = matmul(h.matrix(), &self.f);
        Ok(self.f.iter().zip(hf.iter()).map(|(a, b)| (a.conj() * b).re).sum())
    }

    /// Population `⟨v|ρ|v⟩`.
    pub fn population(&self, v: &PureState) -> Result<f64> {
        if v.dim() != self.dim() {
            return Err(Error::arg("vector dimension does not match state"));
        }
        Ok((v.vector().adjoint() * &self.f).norm_squared())
    }

    /// Diagonal of `ρ` in the computational basis.
    pub fn diagonal(&self) -> Vec<f64> {
        self.f.row_iter().map(|row| row.norm_squared()).collect()
    }

    pub fn to_density(&self) -> Result<DensityMatrix> {
        if self.dim() > MAX_DIM {
            return Err(Error::Size { dim: self.dim(), max: MAX_DIM });
        }
        Ok(DensityMatrix::wrap(&self.f * self.f.adjoint()))
    }

    /// `U F`, i.e. `UρU†`.
    pub fn evolve(&self, u: &Operator) -> Result<FactoredState> {
        Ok(FactoredState { f: u.apply_matrix(&self.f)? })
    }

    /// `F_A ⊗ F_B`
    pub fn tensor(&self, other: &FactoredState) -> Result<FactoredState> {
        let dim = self.dim() * other.dim();
        if dim > MAX_FACTORED_DIM {
            return Err(Error::Size { dim, max: MAX_FACTORED_DIM });
        }
        Ok(FactoredState { f: self.f.kronecker(&other.f) })
    }

    /// Reduced state on the factors at positions `keep` (ascending) of `dims`.
    /// Traced indices move into the column space of the factor.
    pub fn partial_trace(&self, dims: &[usize], keep: &[usize]) -> Result<FactoredState> {
        if dims.iter().product::<usize>() != self.dim() {
            return Err(Error::arg("factor dimensions do not match state dimension"));
        }
        if keep.is_empty() || keep.iter().any(|&k| k >= dims.len()) {
            return Err(Error::arg("invalid factor subset for partial trace"));
        }
        let (kept, traced, n_keep, n_trace) = split_indices(dims, keep);
        let r = self.f.ncols();
        let mut out = DMatrix::<C64>::zeros(n_keep, n_trace * r);
        for i in 0..self.dim() {
            for j in 0..r {
                let z = self.f[(i, j)];
                if z != C64::new(0.0, 0.0) {
                    out[(kept[i], traced[i] * r + j)] = z;
                }
            }
        }
        Ok(FactoredState { f: out }.compressed())
    }

    /// Replaces a wide factor by an equivalent one with at most `dim` columns,
    /// and drops all-zero columns.
    pub fn compressed(self) -> FactoredState {
        let f = self.f;
        let nonzero: Vec<usize> =
            (0..f.ncols()).filter(|&j| f.column(j).iter().any(|z| *z != C64::new(0.0, 0.0))).collect();
        let f = if nonzero.len() < f.ncols() && !nonzero.is_empty() {
            DMatrix::from_columns(&nonzero.iter().map(|&j| f.column(j)).collect::<Vec<_>>())
        } else {
            f
        };
        if f.ncols() <= f.nrows() {
            return FactoredState { f };
        }
        let rho = &f * f.adjoint();
        FactoredState::from_density(&DensityMatrix::wrap(rho))
    }

    /// Trace distance bound `‖ρ − σ‖` in Frobenius norm, via Gram matrices.
    pub fn frobenius_distance(&self, other: &FactoredState) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::arg("dimension mismatch"));
        }
        let aa = (self.f.adjoint() * &self.f).norm_squared();
        let bb = (other.f.adjoint() * &other.f).norm_squared();
        let ab = (self.f.adjoint() * &other.f).norm_squared();
        Ok((aa + bb - 2.0 * ab).max(0.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qop::{von_neumann_entropy, Factor, Subsystem, SubsystemLayout};
    use approx::assert_relative_eq;

    #[test]
    fn entropy_matches_dense() {
        let rho = DensityMatrix::from_diagonal(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let fs = FactoredState::from_density(&rho);
        assert_relative_eq!(fs.entropy(), von_neumann_entropy(&rho), epsilon = 1e-13);
    }

    #[test]
    fn partial_trace_matches_dense() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = PureState::from_real(&[h, 0.0, 0.0, 0.0, 0.0, h]).unwrap();
        let fs = FactoredState::from_pure(&v);
        let dense = v.density();
        let layout = SubsystemLayout::new(vec![
            Subsystem::new(Factor::W, Operator::zeros(3)),
            Subsystem::new(Factor::S, Operator::zeros(2)),
        ])
        .unwrap();
        for (keep, label) in [(0usize, Factor::W), (1, Factor::S)] {
            let a = fs.partial_trace(&[3, 2], &[keep]).unwrap().to_density().unwrap();
            let b = layout.partial_trace(&dense, &[label]).unwrap();
            assert!(a.distance(&b).unwrap() <= 1e-14);
        }
    }

    #[test]
    fn mixture_and_distance() {
        let a = FactoredState::from_pure(&PureState::basis(3, 0));
        let b = FactoredState::from_pure(&PureState::basis(3, 2));
        let m = FactoredState::mixture(&[(0.5, &a), (0.5, &b)]).unwrap();
        assert_relative_eq!(m.entropy(), 2f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(a.frobenius_distance(&b).unwrap(), 2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(a.frobenius_distance(&a).unwrap(), 0.0, epsilon = 1e-7);
    }

    #[test]
    fn tall_states_beyond_dense_limit() {
        let n = 10_000;
        let f = DMatrix::from_element(n, 1, c(1.0 / (n as f64).sqrt()));
        let s = FactoredState::new(f).unwrap();
        assert!(s.entropy().abs() <= 1e-12);
        assert!(s.to_density().is_err());
    }
}
