use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::operator::Operator;
use super::spectral::eigenspaces;
use super::{c, C64};

const GRAM_TOL: f64 = 1e-9;
const DEPENDENCE_TOL: f64 = 1e-8;

/// An invariant subspace of the total Hamiltonian, stored either as a list of
/// computational basis indices or as orthonormal columns.
#[derive(Clone, Debug)]
pub enum Block {
    Coordinates(Vec<usize>),
    Dense(DMatrix<C64>),
}

impl Block {
    pub fn size(&self) -> usize {
        match self {
            Block::Coordinates(idx) => idx.len(),
            Block::Dense(b) => b.ncols(),
        }
    }

    fn project(&self, v: &DVector<C64>) -> DVector<C64> {
        match self {
            Block::Coordinates(idx) => DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i])),
            Block::Dense(b) => b.adjoint() * v,
        }
    }

    /// Adds `B X B†` into `out`.
    fn scatter(&self, x: &DMatrix<C64>, out: &mut DMatrix<C64>) {
        match self {
            Block::Coordinates(idx) => {
                for (a, &i) in idx.iter().enumerate() {
                    for (b, &j) in idx.iter().enumerate() {
                        out[(i, j)] += x[(a, b)];
                    }
                }
            }
            Block::Dense(b) => *out += b * x * b.adjoint(),
        }
    }
}

/// Eigenspaces of `h` as blocks; a diagonal `h` yields coordinate blocks.
pub fn energy_blocks(h: &Operator, tol: f64) -> Result<Vec<Block>> {
    let m = h.matrix();
    let n = h.dim();
    let diagonal = (0..n).all(|j| (0..n).all(|i| i == j || m[(i, j)] == C64::new(0.0, 0.0)));
    if diagonal {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| m[(a, a)].re.total_cmp(&m[(b, b)].re));
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut start_energy = f64::NEG_INFINITY;
        for i in order {
            let e = m[(i, i)].re;
            match blocks.last_mut() {
                Some(last) if e - start_energy <= tol => last.push(i),
                _ => {
                    start_energy = e;
                    blocks.push(vec![i]);
                }
            }
        }
        return Ok(blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                Block::Coordinates(b)
            })
            .collect());
    }
    Ok(eigenspaces(h, tol)?.into_iter().map(|s| Block::Dense(s.basis)).collect())
}

fn orthonormalize_against(v: DVector<C64>, basis: &[DVector<C64>]) -> DVector<C64> {
    let mut r = v;
    // Two passes of modified Gram-Schmidt.
    for _ in 0..2 {
        for q in basis {
            let coeff = q.dotc(&r);
            r -= q * coeff;
        }
    }
    r
}

fn extend_to_basis(mut q: Vec<DVector<C64>>, k: usize) -> Vec<DVector<C64>> {
    for j in 0..k {
        if q.len() == k {
            break;
        }
        let mut e = DVector::zeros(k);
        e[j] = c(1.0);
        let r = orthonormalize_against(e, &q);
        let norm = r.norm();
        if norm > 1e-6 {
            q.push(r / c(norm));
        }
    }
    q
}

/// Unitary `U` with `U inputs[i] = outputs[i]` that leaves every block
/// invariant. Inside each block the prescribed pairs are orthonormalized and
/// the remaining directions are paired in order of extension.
pub fn complete_unitary(
    dim: usize,
    inputs: &[DVector<C64>],
    outputs: &[DVector<C64>],
    blocks: &[Block],
) -> Result<Operator> {
    if inputs.len() != outputs.len() {
        return Err(Error::arg("inputs and outputs differ in number"));
    }
    if inputs.iter().chain(outputs).any(|v| v.len() != dim) {
        return Err(Error::arg("vector dimension does not match the space"));
    }
    let covered: usize = blocks.iter().map(Block::size).sum();
    if covered != dim {
        return Err(Error::arg(format!("blocks span {covered} of {dim} dimensions")));
    }
    let mut u = DMatrix::<C64>::zeros(dim, dim);
    for (bi, block) in blocks.iter().enumerate() {
        let k = block.size();
        let a: Vec<DVector<C64>> = inputs.iter().map(|v| block.project(v)).collect();
        let b: Vec<DVector<C64>> = outputs.iter().map(|v| block.project(v)).collect();
        for x in 0..a.len() {
            for y in 0..a.len() {
                let ga = a[x].dotc(&a[y]);
                let gb = b[x].dotc(&b[y]);
                if (ga - gb).norm() > GRAM_TOL {
                    return Err(Error::construction(format!(
                        "prescribed map is not isometric within invariant block {bi} \
                         (overlap {ga} vs {gb} for pair {x},{y})"
                    )));
                }
            }
        }
        let mut qa: Vec<DVector<C64>> = Vec::new();
        let mut qb: Vec<DVector<C64>> = Vec::new();
        for (ax, bx) in a.iter().zip(&b) {
            let mut ra = ax.clone();
            let mut rb = bx.clone();
            for (qai, qbi) in qa.iter().zip(&qb) {
                let coeff = qai.dotc(ax);
                ra -= qai * coeff;
                rb -= qbi * coeff;
            }
            let norm = ra.norm();
            if norm <= DEPENDENCE_TOL {
                continue;
            }
            let ra = orthonormalize_against(ra / c(norm), &qa);
            let rb = orthonormalize_against(rb / c(norm), &qb);
            let (na, nb) = (ra.norm(), rb.norm());
            qa.push(ra / c(na));
            qb.push(rb / c(nb));
        }
        let qa = extend_to_basis(qa, k);
        let qb = extend_to_basis(qb, k);
        if qa.len() != k || qb.len() != k {
            return Err(Error::construction("failed to extend block basis"));
        }
        let ma = DMatrix::from_columns(&qa);
        let mb = DMatrix::from_columns(&qb);
        block.scatter(&(mb * ma.adjoint()), &mut u);
    }
    let op = Operator::from_matrix(u)?;
    for (x, (i, o)) in inputs.iter().zip(outputs).enumerate() {
        if (op.apply(i)? - o).norm() > 1e-8 {
            return Err(Error::construction(format!("completed unitary misses prescribed image {x}")));
        }
    }
    Ok(op)
}
