//! Seeded random states and unitaries for property tests and scans.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::qop::{c, Block, DensityMatrix, Operator, PureState, C64};

/// Deterministic generator for instance `index` of a run seeded with `seed`.
pub fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn ginibre<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> DMatrix<C64> {
    DMatrix::from_fn(n, m, |_, _| gaussian(rng))
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of `R`
/// moved into `Q`.
pub fn haar_unitary_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<C64> {
    let qr = ginibre(n, n, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Operator {
    Operator::from_matrix(haar_unitary_matrix(n, rng)).expect("Haar unitary is finite")
}

pub fn random_pure_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PureState {
    let v = DVector::from_fn(n, |_, _| gaussian(rng));
    PureState::normalized(v).expect("Gaussian vector is nonzero")
}

/// Hilbert-Schmidt random density matrix of full rank.
pub fn random_density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(n, n, rng);
    let m = &g * g.adjoint();
    let tr = m.trace();
    DensityMatrix::from_matrix(m / tr).expect("Ginibre product is a state")
}

/// Haar unitary inside every block, identity coupling between blocks.
pub fn random_block_unitary<R: Rng + ?Sized>(dim: usize, blocks: &[Block], rng: &mut R) -> Operator {
    let mut u = DMatrix::<C64>::zeros(dim, dim);
    for block in blocks {
        let k = block.size();
        let inner = haar_unitary_matrix(k, rng);
        match block {
            Block::Coordinates(idx) => {
                for (a, &i) in idx.iter().enumerate() {
                    for (b, &j) in idx.iter().enumerate() {
                        u[(i, j)] = inner[(a, b)];
                    }
                }
            }
            Block::Dense(b) => u += b * inner * b.adjoint(),
        }
    }
    Operator::from_matrix(u).expect("block unitary is finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qop::{commutator_norm, energy_blocks};

    #[test]
    fn haar_is_unitary() {
        let mut rng = instance_rng(7, 0);
        for n in [1, 2, 5, 16] {
            assert!(haar_unitary(n, &mut rng).is_unitary());
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = random_pure_state(4, &mut instance_rng(1, 3));
        let b = random_pure_state(4, &mut instance_rng(1, 3));
        let c = random_pure_state(4, &mut instance_rng(1, 4));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn block_unitary_conserves_energy() {
        let h = Operator::from_diagonal(&[0.0, 1.0, 1.0, 2.0, 1.0]);
        let blocks = energy_blocks(&h, 1e-9).unwrap();
        let u = random_block_unitary(5, &blocks, &mut instance_rng(2, 0));
        assert!(u.is_unitary());
        assert!(commutator_norm(&u, &h).unwrap() <= 1e-12);
    }
}
