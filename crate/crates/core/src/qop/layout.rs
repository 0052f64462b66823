use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::operator::{tensor_all, DensityMatrix, Operator};
use super::{C64, MAX_DIM};

/// Subsystem labels. Tensor products always run in this order, left to right.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Factor {
    /// Weight (work storage)
    W,
    /// Working system
    S,
    /// Demon memory
    D,
    /// Thermal reservoir
    R,
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Factor::W => "W",
            Factor::S => "S",
            Factor::D => "D",
            Factor::R => "R",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct Subsystem {
    pub label: Factor,
    pub hamiltonian: Operator,
}

impl Subsystem {
    pub fn new(label: Factor, hamiltonian: Operator) -> Self {
        Subsystem { label, hamiltonian }
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }
}

/// Ordered list of subsystems with their Hamiltonians.
#[derive(Clone, Debug)]
pub struct SubsystemLayout {
    factors: Vec<Subsystem>,
}

impl SubsystemLayout {
    /// Factors must appear in canonical `(W, S, D, R)` order, each at most once.
    pub fn new(factors: Vec<Subsystem>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::arg("layout needs at least one factor"));
        }
        if factors.windows(2).any(|w| w[0].label >= w[1].label) {
            return Err(Error::arg("layout factors must be distinct and ordered W, S, D, R"));
        }
        for f in &factors {
            if !f.hamiltonian.is_hermitian() {
                return Err(Error::arg(format!("Hamiltonian of factor {} is not Hermitian", f.label)));
            }
        }
        let total = factors.iter().try_fold(1usize, |acc, f| acc.checked_mul(f.dim())).unwrap_or(usize::MAX);
        if total > MAX_DIM {
            return Err(Error::Size { dim: total, max: MAX_DIM });
        }
        Ok(SubsystemLayout { factors })
    }

    pub fn factors(&self) -> &[Subsystem] {
        &self.factors
    }

    pub fn labels(&self) -> Vec<Factor> {
        self.factors.iter().map(|f| f.label).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim()).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn position(&self, label: Factor) -> Option<usize> {
        self.factors.iter().position(|f| f.label == label)
    }

    pub fn dim_of(&self, label: Factor) -> Result<usize> {
        Ok(self.get(label)?.dim())
    }

    pub fn hamiltonian(&self, label: Factor) -> Result<&Operator> {
        Ok(&self.get(label)?.hamiltonian)
    }

    fn get(&self, label: Factor) -> Result<&Subsystem> {
        self.factors
            .iter()
            .find(|f| f.label == label)
            .ok_or_else(|| Error::arg(format!("factor {label} not in layout")))
    }

    /// Pads a single-factor operator with identities.
    pub fn embed(&self, label: Factor, op: &Operator) -> Result<Operator> {
        let pos = self.position(label).ok_or_else(|| Error::arg(format!("factor {label} not in layout")))?;
        if op.dim() != self.factors[pos].dim() {
            return Err(Error::arg(format!("operator dimension does not match factor {label}")));
        }
        let parts: Vec<Operator> = self
            .factors
            .iter()
            .enumerate()
            .map(|(i, f)| if i == pos { op.clone() } else { Operator::identity(f.dim()) })
            .collect();
        tensor_all(&parts.iter().collect::<Vec<_>>())
    }

    /// `Σ_k 1 ⊗ … ⊗ H_k ⊗ … ⊗ 1`
    pub fn total_hamiltonian(&self) -> Result<Operator> {
        let n = self.total_dim();
        let mut acc = Operator::zeros(n);
        for f in &self.factors {
            acc = acc.add(&self.embed(f.label, &f.hamiltonian)?)?;
        }
        Ok(acc)
    }

    /// Layout restricted to `keep`, in canonical order.
    pub fn restrict(&self, keep: &[Factor]) -> Result<SubsystemLayout> {
        let positions = self.keep_positions(keep)?;
        SubsystemLayout::new(positions.iter().map(|&p| self.factors[p].clone()).collect())
    }

    fn keep_positions(&self, keep: &[Factor]) -> Result<Vec<usize>> {
        if keep.is_empty() {
            return Err(Error::arg("partial trace must keep at least one factor"));
        }
        let mut positions = Vec::with_capacity(keep.len());
        for &label in keep {
            let p = self.position(label).ok_or_else(|| Error::arg(format!("factor {label} not in layout")))?;
            if positions.contains(&p) {
                return Err(Error::arg(format!("factor {label} listed twice")));
            }
            positions.push(p);
        }
        positions.sort_unstable();
        Ok(positions)
    }

    /// Reduced state on `keep`; the result is ordered canonically.
    pub fn partial_trace(&self, rho: &DensityMatrix, keep: &[Factor]) -> Result<DensityMatrix> {
        if rho.dim() != self.total_dim() {
            return Err(Error::arg(format!(
                "state dimension {} does not match layout dimension {}",
                rho.dim(),
                self.total_dim()
            )));
        }
        let positions = self.keep_positions(keep)?;
        Ok(DensityMatrix::wrap(partial_trace_dims(rho.matrix(), &self.dims(), &positions)))
    }
}

/// Splits each flat index into (kept, traced) multi-indices.
pub(crate) fn split_indices(dims: &[usize], keep: &[usize]) -> (Vec<usize>, Vec<usize>, usize, usize) {
    let n: usize = dims.iter().product();
    let mut kept = vec![0usize; n];
    let mut traced = vec![0usize; n];
    let mut n_keep = 1;
    let mut n_trace = 1;
    for (pos, &d) in dims.iter().enumerate() {
        if keep.contains(&pos) {
            n_keep *= d;
        } else {
            n_trace *= d;
        }
    }
    for i in 0..n {
        let mut rem = i;
        let mut digits = vec![0usize; dims.len()];
        for (pos, &d) in dims.iter().enumerate().rev() {
            digits[pos] = rem % d;
            rem /= d;
        }
        let (mut k, mut t) = (0, 0);
        for (pos, &d) in dims.iter().enumerate() {
            if keep.contains(&pos) {
                k = k * d + digits[pos];
            } else {
                t = t * d + digits[pos];
            }
        }
        kept[i] = k;
        traced[i] = t;
    }
    (kept, traced, n_keep, n_trace)
}

/// Partial trace of a square matrix over every factor not in `keep`
/// (positions into `dims`, ascending).
pub fn partial_trace_dims(m: &DMatrix<C64>, dims: &[usize], keep: &[usize]) -> DMatrix<C64> {
    let (kept, traced, n_keep, n_trace) = split_indices(dims, keep);
    let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_trace];
    for i in 0..kept.len() {
        groups[traced[i]].push((i, kept[i]));
    }
    let mut out = DMatrix::<C64>::zeros(n_keep, n_keep);
    for group in &groups {
        for &(j, kj) in group {
            for &(i, ki) in group {
                out[(ki, kj)] += m[(i, j)];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qop::{tensor_product, PureState};
    use approx::assert_relative_eq;

    fn layout(dims: &[(Factor, usize)]) -> SubsystemLayout {
        SubsystemLayout::new(dims.iter().map(|&(l, d)| Subsystem::new(l, Operator::zeros(d))).collect()).unwrap()
    }

    #[test]
    fn product_state_factorizes() {
        let a = DensityMatrix::from_diagonal(&[0.2, 0.3, 0.5]).unwrap();
        let b = PureState::from_real(&[0.6, 0.8]).unwrap().density();
        let l = layout(&[(Factor::S, 3), (Factor::D, 2)]);
        let ab = a.tensor(&b).unwrap();
        assert!(l.partial_trace(&ab, &[Factor::S]).unwrap().distance(&a).unwrap() <= 1e-14);
        assert!(l.partial_trace(&ab, &[Factor::D]).unwrap().distance(&b).unwrap() <= 1e-14);
    }

    #[test]
    fn bell_marginal_is_maximally_mixed() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = PureState::from_real(&[h, 0.0, 0.0, h]).unwrap().density();
        let l = layout(&[(Factor::S, 2), (Factor::D, 2)]);
        let red = l.partial_trace(&bell, &[Factor::S]).unwrap();
        assert!(red.distance(&DensityMatrix::maximally_mixed(2)).unwrap() <= 1e-14);
    }

    #[test]
    fn middle_factor_trace() {
        let a = DensityMatrix::from_diagonal(&[0.1, 0.9]).unwrap();
        let b = DensityMatrix::maximally_mixed(3);
        let c = PureState::from_real(&[0.0, 1.0]).unwrap().density();
        let abc = a.tensor(&b).unwrap().tensor(&c).unwrap();
        let l = layout(&[(Factor::W, 2), (Factor::S, 3), (Factor::D, 2)]);
        let ac = l.partial_trace(&abc, &[Factor::D, Factor::W]).unwrap();
        assert!(ac.distance(&a.tensor(&c).unwrap()).unwrap() <= 1e-14);
    }

    #[test]
    fn rejects_bad_keep_sets() {
        let l = layout(&[(Factor::S, 2), (Factor::D, 2)]);
        let rho = DensityMatrix::maximally_mixed(4);
        assert!(l.partial_trace(&rho, &[]).is_err());
        assert!(l.partial_trace(&rho, &[Factor::R]).is_err());
        assert!(l.partial_trace(&DensityMatrix::maximally_mixed(3), &[Factor::S]).is_err());
    }

    #[test]
    fn layout_validation() {
        let z = |d| Operator::zeros(d);
        assert!(SubsystemLayout::new(vec![Subsystem::new(Factor::D, z(2)), Subsystem::new(Factor::S, z(2)),]).is_err());
        let non_herm = Operator::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(SubsystemLayout::new(vec![Subsystem::new(Factor::S, non_herm)]).is_err());
        assert!(matches!(
            SubsystemLayout::new(vec![Subsystem::new(Factor::W, z(64)), Subsystem::new(Factor::S, z(65))]),
            Err(Error::Size { .. })
        ));
    }

    #[test]
    fn total_hamiltonian_is_additive() {
        let hs = Operator::from_diagonal(&[0.5, -0.5]);
        let hd = Operator::from_diagonal(&[1.0, 2.0, 3.0]);
        let l =
            SubsystemLayout::new(vec![Subsystem::new(Factor::S, hs.clone()), Subsystem::new(Factor::D, hd.clone())])
                .unwrap();
        let expect = tensor_product(&hs, &Operator::identity(3))
            .unwrap()
            .add(&tensor_product(&Operator::identity(2), &hd).unwrap())
            .unwrap();
        let got = l.total_hamiltonian().unwrap();
        assert_relative_eq!(got.sub(&expect).unwrap().frobenius_norm(), 0.0);
    }
}
