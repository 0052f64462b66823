//! Spectral functions: Hermitian eigendecomposition and the entropic
//! quantities built on it. Natural logarithms throughout.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

use super::operator::{DensityMatrix, Operator};
use super::{C64, EPS_ALG, EPS_EIG};

/// Eigenvalues in ascending order with matching eigenvector columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl Spectrum {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

fn is_diagonal(m: &DMatrix<C64>) -> bool {
    let n = m.nrows();
    (0..n).all(|j| (0..n).all(|i| i == j || m[(i, j)] == C64::new(0.0, 0.0)))
}

/// Hermitian eigendecomposition. Non-Hermitian input is rejected.
pub fn eigh(op: &Operator) -> Result<Spectrum> {
    if !op.is_hermitian() {
        return Err(Error::arg("eigendecomposition requires a Hermitian operator"));
    }
    Ok(eigh_unchecked(op.matrix()))
}

pub(crate) fn eigh_unchecked(m: &DMatrix<C64>) -> Spectrum {
    let n = m.nrows();
    let (values, vectors) = if is_diagonal(m) {
        ((0..n).map(|i| m[(i, i)].re).collect::<Vec<_>>(), DMatrix::<C64>::identity(n, n))
    } else {
        let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(herm);
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted_values = order.iter().map(|&i| values[i]).collect();
    let sorted_vectors = DMatrix::from_fn(n, n, |i, j| vectors[(i, order[j])]);
    Spectrum { values: sorted_values, vectors: sorted_vectors }
}

pub(crate) fn eigvalsh_unchecked(m: &DMatrix<C64>) -> Vec<f64> {
    let mut values: Vec<f64> = if is_diagonal(m) {
        (0..m.nrows()).map(|i| m[(i, i)].re).collect()
    } else {
        let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().copied().collect()
    };
    values.sort_by(f64::total_cmp);
    values
}

/// `−Σ λ ln λ` over eigenvalues above `EPS_EIG`.
pub fn entropy_of_spectrum(values: &[f64]) -> f64 {
    values.iter().filter(|&&p| p > EPS_EIG).map(|&p| -p * p.ln()).sum()
}

/// `S(ρ) = −tr[ρ ln ρ]` in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of_spectrum(&eigvalsh_unchecked(rho.matrix()))
}

/// `S(ρ‖σ) = tr[ρ(ln ρ − ln σ)]`; `f64::INFINITY` when the support of `ρ`
/// is not contained in the support of `σ`.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::arg("relative entropy of states with different dimensions"));
    }
    let r = eigh_unchecked(rho.matrix());
    let s = eigh_unchecked(sigma.matrix());
    // overlaps[i][j] = |⟨r_i|s_j⟩|²
    let cross = r.vectors.adjoint() * &s.vectors;
    let mut leak = 0.0;
    let mut cross_term = 0.0;
    for (i, &lam) in r.values.iter().enumerate() {
        if lam <= EPS_EIG {
            continue;
        }
        for (j, &mu) in s.values.iter().enumerate() {
            let w = lam * cross[(i, j)].norm_sqr();
            if mu > EPS_EIG {
                cross_term += w * mu.ln();
            } else {
                leak += w;
            }
        }
    }
    if leak > EPS_ALG {
        return Ok(f64::INFINITY);
    }
    Ok(-entropy_of_spectrum(&r.values) - cross_term)
}

/// Gibbs state `e^{−βH}/tr[e^{−βH}]`.
pub fn thermal_state(h: &Operator, beta: f64) -> Result<DensityMatrix> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::arg(format!("inverse temperature must be finite and non-negative, got {beta}")));
    }
    let spec = eigh(h)?;
    let weights = gibbs_weights(&spec.values, beta);
    let n = h.dim();
    let mut m = DMatrix::<C64>::zeros(n, n);
    for (k, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let col = spec.vectors.column(k);
        m += col * col.adjoint() * C64::new(w, 0.0);
    }
    Ok(DensityMatrix::wrap(m))
}

/// Normalized Boltzmann weights, shifted by the ground energy for stability.
pub fn gibbs_weights(energies: &[f64], beta: f64) -> Vec<f64> {
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = energies.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / z).collect()
}

/// `ln tr[e^{−βH}]`
pub fn log_partition_function(h: &Operator, beta: f64) -> Result<f64> {
    let spec = eigh(h)?;
    let e0 = spec.min();
    let z: f64 = spec.values.iter().map(|&e| (-beta * (e - e0)).exp()).sum();
    Ok(z.ln() - beta * e0)
}

/// One eigenspace of a Hermitian operator.
#[derive(Clone, Debug)]
pub struct Eigenspace {
    pub value: f64,
    /// Orthonormal basis as columns.
    pub basis: DMatrix<C64>,
}

/// Groups eigenvalues closer than `tol` into degenerate eigenspaces.
pub fn eigenspaces(h: &Operator, tol: f64) -> Result<Vec<Eigenspace>> {
    let spec = eigh(h)?;
    let n = h.dim();
    let mut spaces = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && spec.values[end] - spec.values[start] <= tol {
            end += 1;
        }
        let basis = spec.vectors.columns(start, end - start).into_owned();
        let value = spec.values[start..end].iter().sum::<f64>() / (end - start) as f64;
        spaces.push(Eigenspace { value, basis });
        start = end;
    }
    Ok(spaces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qop::PureState;
    use approx::assert_relative_eq;

    #[test]
    fn pure_state_entropy_is_zero() {
        let psi = PureState::from_real(&[0.6, 0.0, 0.8]).unwrap();
        assert!(von_neumann_entropy(&psi.density()).abs() <= 1e-12);
    }

    #[test]
    fn maximally_mixed_entropy() {
        for d in [2usize, 3, 7] {
            assert_relative_eq!(
                von_neumann_entropy(&DensityMatrix::maximally_mixed(d)),
                (d as f64).ln(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn diagonal_entropy_matches_scalar_formula() {
        // scalar oracle: −Σ p ln p
        let oracle = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        let rho = DensityMatrix::from_diagonal(&[0.25, 0.75]).unwrap();
        assert_relative_eq!(von_neumann_entropy(&rho), oracle, epsilon = 1e-14);
        assert_relative_eq!(oracle, 0.562_335_144_618_808_3, epsilon = 1e-15);
    }

    #[test]
    fn relative_entropy_edge_cases() {
        let rho = DensityMatrix::from_diagonal(&[0.3, 0.7]).unwrap();
        assert!(relative_entropy(&rho, &rho).unwrap().abs() <= 1e-12);
        let zero = PureState::basis(2, 0).density();
        let one = PureState::basis(2, 1).density();
        assert_eq!(relative_entropy(&zero, &one).unwrap(), f64::INFINITY);
        assert!(relative_entropy(&zero, &DensityMatrix::maximally_mixed(3)).is_err());
    }

    #[test]
    fn thermal_limits() {
        let h = Operator::from_diagonal(&[0.5, -0.5, 1.5]);
        let inf_t = thermal_state(&h, 0.0).unwrap();
        assert!(inf_t.distance(&DensityMatrix::maximally_mixed(3)).unwrap() <= 1e-12);
        let cold = thermal_state(&h, 1e6 / h.operator_norm()).unwrap();
        let ground = PureState::basis(3, 1).density();
        assert!(cold.distance(&ground).unwrap() <= 1e-6);
    }

    #[test]
    fn thermal_qubit_population() {
        let omega = 1.0;
        let h = Operator::from_diagonal(&[omega / 2.0, -omega / 2.0]);
        let tau = thermal_state(&h, 1.0).unwrap();
        let oracle = 1.0 / (1.0 + std::f64::consts::E);
        assert_relative_eq!(tau.matrix()[(0, 0)].re, oracle, epsilon = 1e-14);
    }

    #[test]
    fn thermal_rejects_non_hermitian() {
        let h = Operator::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(thermal_state(&h, 1.0).is_err());
    }

    #[test]
    fn eigenspaces_group_degeneracies() {
        let h = Operator::from_diagonal(&[1.0, 0.0, 1.0, 2.0]);
        let spaces = eigenspaces(&h, 1e-9).unwrap();
        let dims: Vec<usize> = spaces.iter().map(|s| s.basis.ncols()).collect();
        assert_eq!(dims, vec![1, 2, 1]);
    }
}
