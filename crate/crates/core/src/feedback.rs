//! Record-conditioned feedback `V = Σ_x U_x ⊗ P_D^x`, its certification, the
//! per-branch maps on system, weight and reservoir, and the oscillator weight
//! with its shift unitaries.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qop::{
    c, commutator_norm, matmul, norm_within, DensityMatrix, Factor, FactoredState, Operator, PureState, Subsystem,
    SubsystemLayout, C64, EPS_ALG, MAX_DIM,
};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Outcome-indexed unitaries on the branch space (`W⊗S`, or `W⊗S⊗R` with a
/// reservoir) and the composed global unitary on `W⊗S⊗D[⊗R]`.
#[derive(Clone, Debug)]
pub struct FeedbackScheme {
    branch_unitaries: Vec<Operator>,
    demon_projectors: Vec<Operator>,
    branch_dims: Vec<usize>,
    composed: Operator,
}

/// Index of the demon factor among the global factors: right after `W, S`.
const DEMON_SLOT: usize = 2;

fn global_dims(branch_dims: &[usize], d_d: usize) -> Vec<usize> {
    let mut dims = branch_dims.to_vec();
    dims.insert(DEMON_SLOT, d_d);
    dims
}

/// Splits a branch-space index into the parts before and after the demon slot.
fn split_branch(i: usize, branch_dims: &[usize]) -> (usize, usize) {
    let tail: usize = branch_dims[DEMON_SLOT..].iter().product();
    (i / tail, i % tail)
}

/// `Σ_x U_x ⊗ P_D^x` with the demon factor inserted in canonical position.
fn compose(unitaries: &[Operator], projectors: &[Operator], branch_dims: &[usize]) -> Result<Operator> {
    let nb: usize = branch_dims.iter().product();
    let d_d = projectors[0].dim();
    let tail: usize = branch_dims[DEMON_SLOT..].iter().product();
    let n = nb * d_d;
    if n > MAX_DIM {
        return Err(Error::Size { dim: n, max: MAX_DIM });
    }
    let global = |head: usize, d: usize, t: usize| (head * d_d + d) * tail + t;
    let mut v = DMatrix::<C64>::zeros(n, n);
    for (u, p) in unitaries.iter().zip(projectors) {
        let um = u.matrix();
        let pm = p.matrix();
        let p_nz: Vec<(usize, usize, C64)> = (0..d_d)
            .flat_map(|a| (0..d_d).map(move |b| (a, b)))
            .filter(|&(a, b)| pm[(a, b)] != ZERO)
            .map(|(a, b)| (a, b, pm[(a, b)]))
            .collect();
        for j in 0..nb {
            let (hj, tj) = split_branch(j, branch_dims);
            for i in 0..nb {
                let z = um[(i, j)];
                if z == ZERO {
                    continue;
                }
                let (hi, ti) = split_branch(i, branch_dims);
                for &(a, b, pab) in &p_nz {
                    v[(global(hi, a, ti), global(hj, b, tj))] += z * pab;
                }
            }
        }
    }
    Operator::from_matrix(v)
}

fn check_projector_family(projectors: &[Operator]) -> Result<()> {
    let d = projectors.first().ok_or_else(|| Error::construction("empty demon projector family"))?.dim();
    let mut sum = Operator::zeros(d);
    for (i, p) in projectors.iter().enumerate() {
        if p.dim() != d || !p.is_projector() {
            return Err(Error::construction(format!("demon projector {i} is not a projector on D")));
        }
        for q in &projectors[..i] {
            if q.mul(p)?.operator_norm() > EPS_ALG {
                return Err(Error::construction("demon projectors are not mutually orthogonal"));
            }
        }
        sum = sum.add(p)?;
    }
    if sum.sub(&Operator::identity(d))?.operator_norm() > EPS_ALG {
        return Err(Error::construction("demon projectors are incomplete"));
    }
    Ok(())
}

/// Builds `V` from per-outcome unitaries on the branch space with factor
/// dimensions `branch_dims` (`[D_W, d_S]` or `[D_W, d_S, d_R]`).
pub fn compose_feedback_unitary(
    branch_unitaries: Vec<Operator>,
    demon_projectors: Vec<Operator>,
    branch_dims: &[usize],
) -> Result<FeedbackScheme> {
    if !(2..=3).contains(&branch_dims.len()) {
        return Err(Error::arg("branch space must be W⊗S or W⊗S⊗R"));
    }
    if branch_unitaries.len() != demon_projectors.len() {
        return Err(Error::arg("one branch unitary per demon projector is required"));
    }
    check_projector_family(&demon_projectors)?;
    let nb: usize = branch_dims.iter().product();
    for (x, u) in branch_unitaries.iter().enumerate() {
        if u.dim() != nb {
            return Err(Error::arg(format!("branch unitary {x} does not act on the branch space")));
        }
        if !u.is_unitary() {
            return Err(Error::arg(format!("branch unitary {x} is not unitary")));
        }
    }
    let composed = compose(&branch_unitaries, &demon_projectors, branch_dims)?;
    let scheme = FeedbackScheme { branch_unitaries, demon_projectors, branch_dims: branch_dims.to_vec(), composed };
    if !scheme.composed.is_unitary() {
        return Err(Error::Inconsistency("composed feedback unitary is not unitary".into()));
    }
    Ok(scheme)
}

impl FeedbackScheme {
    pub fn composed(&self) -> &Operator {
        &self.composed
    }

    pub fn branch_unitary(&self, x: usize) -> &Operator {
        &self.branch_unitaries[x]
    }

    pub fn branch_unitaries(&self) -> &[Operator] {
        &self.branch_unitaries
    }

    pub fn demon_projectors(&self) -> &[Operator] {
        &self.demon_projectors
    }

    pub fn branch_dims(&self) -> &[usize] {
        &self.branch_dims
    }

    pub fn outcomes(&self) -> usize {
        self.branch_unitaries.len()
    }

    pub fn demon_dim(&self) -> usize {
        self.demon_projectors[0].dim()
    }

    /// Dimensions of the global space in canonical order.
    pub fn global_dims(&self) -> Vec<usize> {
        global_dims(&self.branch_dims, self.demon_dim())
    }

    pub fn has_reservoir(&self) -> bool {
        self.branch_dims.len() == 3
    }

    /// `‖V − Σ_x P_D^x V P_D^x‖`
    pub fn form_defect(&self) -> Result<f64> {
        form_defect(&self.composed, &self.demon_projectors, &self.branch_dims)
    }

    /// Largest `‖V(|Φ⟩⊗|d⟩) − (U_x|Φ⟩)⊗|d⟩‖` over branch basis vectors `|Φ⟩`
    /// and an orthonormal basis `{|d⟩}` of each `range(P_D^x)`.
    pub fn probe_defect(&self) -> Result<f64> {
        probe_defect(&self.composed, &self.branch_unitaries, &self.demon_projectors, &self.branch_dims)
    }
}

/// Lifts a demon operator to the global space in canonical order.
fn lift_demon(p: &Operator, branch_dims: &[usize]) -> Operator {
    let head: usize = branch_dims[..DEMON_SLOT].iter().product();
    let tail: usize = branch_dims[DEMON_SLOT..].iter().product();
    let m = Operator::identity(head).matrix().kronecker(p.matrix()).kronecker(Operator::identity(tail).matrix());
    Operator::from_matrix(m).expect("lifted projector is finite")
}

/// Block-form test: distance of `V` from its block-diagonal part.
pub fn form_defect(v: &Operator, projectors: &[Operator], branch_dims: &[usize]) -> Result<f64> {
    let mut diag = DMatrix::<C64>::zeros(v.dim(), v.dim());
    for p in projectors {
        let lp = lift_demon(p, branch_dims);
        diag += matmul(&matmul(lp.matrix(), v.matrix()), lp.matrix());
    }
    Ok(Operator::from_matrix(v.matrix() - diag)?.operator_norm())
}

/// Probe test against prescribed branch unitaries.
pub fn probe_defect(
    v: &Operator,
    unitaries: &[Operator],
    projectors: &[Operator],
    branch_dims: &[usize],
) -> Result<f64> {
    let nb: usize = branch_dims.iter().product();
    let d_d = projectors[0].dim();
    let tail: usize = branch_dims[DEMON_SLOT..].iter().product();
    let n = nb * d_d;
    if v.dim() != n {
        return Err(Error::arg("global unitary has the wrong dimension"));
    }
    let mut worst: f64 = 0.0;
    for (u, p) in unitaries.iter().zip(projectors) {
        let spec = crate::qop::eigh(p)?;
        for (k, &val) in spec.values.iter().enumerate() {
            if val < 0.5 {
                continue;
            }
            let d = spec.vectors.column(k);
            // Columns: |Φ_j⟩⊗|d⟩ for every branch basis vector j.
            let mut probes = DMatrix::<C64>::zeros(n, nb);
            for j in 0..nb {
                let (h, t) = (j / tail, j % tail);
                for a in 0..d_d {
                    if d[a] != ZERO {
                        probes[((h * d_d + a) * tail + t, j)] = d[a];
                    }
                }
            }
            let got = matmul(v.matrix(), &probes);
            let um = u.matrix();
            let mut expect = DMatrix::<C64>::zeros(n, nb);
            for j in 0..nb {
                for i in 0..nb {
                    let z = um[(i, j)];
                    if z == ZERO {
                        continue;
                    }
                    let (h, t) = (i / tail, i % tail);
                    for a in 0..d_d {
                        if d[a] != ZERO {
                            expect[((h * d_d + a) * tail + t, j)] += z * d[a];
                        }
                    }
                }
            }
            for j in 0..nb {
                worst = worst.max((got.column(j) - expect.column(j)).norm());
            }
        }
    }
    Ok(worst)
}

/// Branch unitaries `(1⊗⟨d_x|) V (1⊗|d_x⟩)` read off a global unitary for
/// rank-one demon projectors `|d_x⟩⟨d_x|`.
pub fn extract_branch_unitaries(v: &Operator, records: &[PureState], branch_dims: &[usize]) -> Vec<Operator> {
    let nb: usize = branch_dims.iter().product();
    let d_d = records[0].dim();
    let tail: usize = branch_dims[DEMON_SLOT..].iter().product();
    let vm = v.matrix();
    records
        .iter()
        .map(|d| {
            let m = DMatrix::from_fn(nb, nb, |i, j| {
                let (hi, ti) = (i / tail, i % tail);
                let (hj, tj) = (j / tail, j % tail);
                let mut acc = ZERO;
                for a in 0..d_d {
                    for b in 0..d_d {
                        let w = d.amplitude(a).conj() * d.amplitude(b);
                        if w != ZERO {
                            acc += w * vm[((hi * d_d + a) * tail + ti, (hj * d_d + b) * tail + tj)];
                        }
                    }
                }
                acc
            });
            Operator::from_matrix(m).expect("finite")
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct EqualUnitaryGroup {
    pub outcomes: Vec<usize>,
    /// `‖Σ_{x∈X'} [P_D^x, H_D]‖`
    pub projector_commutator: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FeedbackEnergyReport {
    pub pass: bool,
    /// `‖[V, H_W + H_S + H_D (+ H_R)]‖`
    pub total_commutator: f64,
    /// `‖[U_x, H_W + H_S (+ H_R)]‖` per outcome
    pub branch_commutators: Vec<f64>,
    pub equal_unitary_groups: Vec<EqualUnitaryGroup>,
}

/// Layout of the global feedback space.
pub fn feedback_layout(
    h_w: &Operator,
    h_s: &Operator,
    h_d: &Operator,
    h_r: Option<&Operator>,
) -> Result<SubsystemLayout> {
    let mut factors = vec![
        Subsystem::new(Factor::W, h_w.clone()),
        Subsystem::new(Factor::S, h_s.clone()),
        Subsystem::new(Factor::D, h_d.clone()),
    ];
    if let Some(h) = h_r {
        factors.push(Subsystem::new(Factor::R, h.clone()));
    }
    SubsystemLayout::new(factors)
}

pub fn check_feedback_energy(
    scheme: &FeedbackScheme,
    h_w: &Operator,
    h_s: &Operator,
    h_d: &Operator,
    h_r: Option<&Operator>,
) -> Result<FeedbackEnergyReport> {
    if h_r.is_some() != scheme.has_reservoir() {
        return Err(Error::arg("reservoir Hamiltonian must be given exactly for reservoir schemes"));
    }
    let layout = feedback_layout(h_w, h_s, h_d, h_r)?;
    if layout.dims() != scheme.global_dims() {
        return Err(Error::arg("Hamiltonian dimensions do not match the feedback scheme"));
    }
    let total_commutator = commutator_norm(scheme.composed(), &layout.total_hamiltonian()?)?;
    let mut branch_factors = vec![Subsystem::new(Factor::W, h_w.clone()), Subsystem::new(Factor::S, h_s.clone())];
    if let Some(h) = h_r {
        branch_factors.push(Subsystem::new(Factor::R, h.clone()));
    }
    let h_branch = SubsystemLayout::new(branch_factors)?.total_hamiltonian()?;
    let branch_commutators =
        scheme.branch_unitaries.iter().map(|u| commutator_norm(u, &h_branch)).collect::<Result<Vec<_>>>()?;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for x in 0..scheme.outcomes() {
        let found = groups.iter_mut().find(|g| {
            let u = &scheme.branch_unitaries[g[0]];
            norm_within(&(u.matrix() - scheme.branch_unitaries[x].matrix()), EPS_ALG)
        });
        match found {
            Some(g) => g.push(x),
            None => groups.push(vec![x]),
        }
    }
    let equal_unitary_groups = groups
        .into_iter()
        .map(|outcomes| {
            let mut acc = Operator::zeros(h_d.dim());
            for &x in &outcomes {
                acc = acc.add(&scheme.demon_projectors[x])?;
            }
            Ok(EqualUnitaryGroup { projector_commutator: commutator_norm(&acc, h_d)?, outcomes })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeedbackEnergyReport {
        pass: total_commutator <= EPS_ALG,
        total_commutator,
        branch_commutators,
        equal_unitary_groups,
    })
}

/// Outputs of one branch: `Λ_x[ρ̃_x]`, `Λ_x*[ρ_W]` and, with a reservoir,
/// `Λ_x'[τ_R]`.
#[derive(Clone, Debug)]
pub struct BranchMaps {
    pub system: DensityMatrix,
    pub weight: FactoredState,
    pub reservoir: Option<DensityMatrix>,
}

/// Applies `U_x` to `ρ_W ⊗ ρ̃_x [⊗ τ_R]` and returns the three marginals.
pub fn conditional_feedback_maps(
    scheme: &FeedbackScheme,
    x: usize,
    rho_w: &FactoredState,
    post_state: &DensityMatrix,
    reservoir: Option<&DensityMatrix>,
) -> Result<BranchMaps> {
    if x >= scheme.outcomes() {
        return Err(Error::arg(format!("unknown outcome index {x}")));
    }
    apply_branch_unitary(scheme.branch_unitary(x), &scheme.branch_dims, rho_w, post_state, reservoir)
}

/// Same as [`conditional_feedback_maps`] for a bare branch unitary.
pub fn apply_branch_unitary(
    u: &Operator,
    branch_dims: &[usize],
    rho_w: &FactoredState,
    post_state: &DensityMatrix,
    reservoir: Option<&DensityMatrix>,
) -> Result<BranchMaps> {
    if reservoir.is_some() != (branch_dims.len() == 3) {
        return Err(Error::arg("reservoir state must be given exactly for reservoir schemes"));
    }
    if rho_w.dim() != branch_dims[0] || post_state.dim() != branch_dims[1] {
        return Err(Error::arg("weight or system state has the wrong dimension"));
    }
    let mut joint = rho_w.tensor(&FactoredState::from_density(post_state))?;
    if let Some(tau) = reservoir {
        if tau.dim() != branch_dims[2] {
            return Err(Error::arg("reservoir state has the wrong dimension"));
        }
        joint = joint.tensor(&FactoredState::from_density(tau))?;
    }
    let out = joint.evolve(u)?;
    let system = out.partial_trace(branch_dims, &[1])?.to_density()?;
    let weight = out.partial_trace(branch_dims, &[0])?;
    let reservoir = match reservoir {
        Some(_) => Some(out.partial_trace(branch_dims, &[2])?.to_density()?),
        None => None,
    };
    Ok(BranchMaps { system, weight, reservoir })
}

/// Truncated harmonic-oscillator weight in a flat superposition of `N`
/// consecutive levels starting at `|2⟩`.
#[derive(Clone, Debug)]
pub struct OscillatorWeight {
    omega: f64,
    dim: usize,
    width: usize,
    initial: PureState,
}

/// Levels kept free above the initial support.
pub const WEIGHT_HEADROOM: usize = 2;

pub fn build_oscillator_weight(omega: f64, n: usize, dim: usize) -> Result<OscillatorWeight> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::arg(format!("omega must be positive, got {omega}")));
    }
    if n == 0 {
        return Err(Error::arg("superposition width N must be at least 1"));
    }
    if dim < n + 2 + WEIGHT_HEADROOM {
        return Err(Error::arg(format!(
            "weight cutoff {dim} leaves no headroom above levels 2..{} (need at least {})",
            n + 1,
            n + 2 + WEIGHT_HEADROOM
        )));
    }
    let amp = 1.0 / (n as f64).sqrt();
    let amps: Vec<f64> = (0..dim).map(|k| if (2..=n + 1).contains(&k) { amp } else { 0.0 }).collect();
    let initial = PureState::from_real(&amps)?;
    Ok(OscillatorWeight { omega, dim, width: n, initial })
}

impl OscillatorWeight {
    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `N`
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn initial(&self) -> &PureState {
        &self.initial
    }

    pub fn initial_state(&self) -> FactoredState {
        FactoredState::from_pure(&self.initial)
    }

    /// `ω n` for `n = 0 … D_W − 1`
    pub fn energies(&self) -> Vec<f64> {
        (0..self.dim).map(|k| self.omega * k as f64).collect()
    }

    pub fn hamiltonian(&self) -> Result<Operator> {
        if self.dim > MAX_DIM {
            return Err(Error::Size { dim: self.dim, max: MAX_DIM });
        }
        Ok(Operator::from_diagonal(&self.energies()))
    }

    pub fn mean_energy(&self) -> f64 {
        self.omega * (self.width as f64 + 3.0) / 2.0
    }
}

/// `G = |φ_−⟩⟨φ̃| + |φ_+⟩⟨φ̃^⊥|` written in the `(φ_+, φ_−)` basis.
///
/// `|φ̃^⊥⟩` is the orthogonal qubit state `(−b*, a*)` with its first nonzero
/// amplitude made real and positive.
pub fn rotation_matrix(phi_plus: &PureState, phi_minus: &PureState, post: &PureState) -> Result<[[C64; 2]; 2]> {
    if post.dim() != 2 || phi_plus.dim() != 2 || phi_minus.dim() != 2 {
        return Err(Error::arg("shift unitaries need a qubit system"));
    }
    let a = post.amplitude(0);
    let b = post.amplitude(1);
    let perp = PureState::from_amplitudes(&[-b.conj(), a.conj()])?.with_canonical_phase();
    // G_{ij} = ⟨φ_i|G|φ_j⟩ with i, j over (+, −).
    let basis = [phi_plus, phi_minus];
    let mut g = [[ZERO; 2]; 2];
    for (i, bi) in basis.iter().enumerate() {
        for (j, bj) in basis.iter().enumerate() {
            let minus_part = bi.inner(phi_minus) * post.inner(bj);
            let plus_part = bi.inner(phi_plus) * perp.inner(bj);
            g[i][j] = minus_part + plus_part;
        }
    }
    Ok(g)
}

/// Energy-conserving conditional shift on `W⊗S` for a qubit system whose gap
/// equals the weight quantum. Level pairs `{|m⟩φ_+, |m+1⟩φ_−}` for
/// `m = 1 … D_W − 2` are rotated by `G`; `|0⟩⊗S`, `|1⟩⊗φ_−` and
/// `|D_W − 1⟩⊗φ_+` are left fixed.
#[derive(Clone, Debug)]
pub struct ShiftUnitary {
    dim_w: usize,
    g: [[C64; 2]; 2],
    /// Columns `φ_+`, `φ_−` in the computational basis.
    frame: [[C64; 2]; 2],
}

impl ShiftUnitary {
    pub fn new(dim_w: usize, phi_plus: &PureState, phi_minus: &PureState, post: &PureState) -> Result<Self> {
        if dim_w < 3 {
            return Err(Error::construction("weight needs at least three levels for shifts"));
        }
        if phi_plus.inner(phi_minus).norm() > EPS_ALG {
            return Err(Error::arg("system eigenbasis is not orthogonal"));
        }
        let g = rotation_matrix(phi_plus, phi_minus, post)?;
        let frame = [[phi_plus.amplitude(0), phi_minus.amplitude(0)], [phi_plus.amplitude(1), phi_minus.amplitude(1)]];
        Ok(ShiftUnitary { dim_w, g, frame })
    }

    pub fn dim(&self) -> usize {
        2 * self.dim_w
    }

    /// Image of `|n⟩⊗|φ_b⟩` as a list of `(level, a, amplitude)` meaning
    /// `amplitude · |level⟩⊗|φ_a⟩`, with `a, b ∈ {0 = +, 1 = −}`.
    fn image(&self, n: usize, b: usize) -> Vec<(usize, usize, C64)> {
        let top = self.dim_w - 2;
        // Block index m and the position of the input inside {|m⟩φ+, |m+1⟩φ−}.
        let (m, pos) = if b == 0 { (n, 0) } else { (n.wrapping_sub(1), 1) };
        if n == 0 || m == 0 || m > top {
            return vec![(n, b, C64::new(1.0, 0.0))];
        }
        vec![(m, 0, self.g[0][pos]), (m + 1, 1, self.g[1][pos])]
    }

    pub fn to_operator(&self) -> Result<Operator> {
        let n = self.dim();
        if n > MAX_DIM {
            return Err(Error::Size { dim: n, max: MAX_DIM });
        }
        // Matrix in the (level, φ±) basis, then conjugated into the computational basis.
        let mut local = DMatrix::<C64>::zeros(n, n);
        for level in 0..self.dim_w {
            for b in 0..2 {
                for (l, a, z) in self.image(level, b) {
                    local[(2 * l + a, 2 * level + b)] += z;
                }
            }
        }
        let frame = DMatrix::from_fn(2, 2, |i, j| self.frame[i][j]);
        let big = Operator::identity(self.dim_w).matrix().kronecker(&frame);
        Operator::from_matrix(matmul(&matmul(&big, &local), &big.adjoint()))
    }

    /// `U F` for a factor with rows indexed by `(level, computational system index)`.
    pub fn apply(&self, f: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        if f.nrows() != self.dim() {
            return Err(Error::arg("factor rows do not match W⊗S"));
        }
        let r = f.ncols();
        let mut out = DMatrix::<C64>::zeros(self.dim(), r);
        for level in 0..self.dim_w {
            for col in 0..r {
                let s0 = f[(2 * level, col)];
                let s1 = f[(2 * level + 1, col)];
                if s0 == ZERO && s1 == ZERO {
                    continue;
                }
                // Coordinates in the (φ+, φ−) frame.
                for b in 0..2 {
                    let coeff = self.frame[0][b].conj() * s0 + self.frame[1][b].conj() * s1;
                    if coeff == ZERO {
                        continue;
                    }
                    for (l, a, z) in self.image(level, b) {
                        let w = z * coeff;
                        out[(2 * l, col)] += w * self.frame[0][a];
                        out[(2 * l + 1, col)] += w * self.frame[1][a];
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Dense `(U_+, U_−)` for the two outcomes of a qubit measurement.
pub fn build_shift_unitaries(
    phi_plus: &PureState,
    phi_minus: &PureState,
    post_plus: &PureState,
    post_minus: &PureState,
    weight: &OscillatorWeight,
) -> Result<(Operator, Operator)> {
    let up = ShiftUnitary::new(weight.dim(), phi_plus, phi_minus, post_plus)?.to_operator()?;
    let um = ShiftUnitary::new(weight.dim(), phi_plus, phi_minus, post_minus)?.to_operator()?;
    Ok((up, um))
}

/// Permutation swapping `|n⟩⊗|from⟩ ↔ |n+k⟩⊗|to⟩` for every `n` with
/// `n + k < D_W`; all other basis states are fixed. It conserves
/// `H_W + H_S` whenever `E_from − E_to = k ω` and both are eigenvectors.
pub fn transition_unitary(dim_w: usize, dim_s: usize, from: usize, to: usize, k: usize) -> Result<Operator> {
    if from >= dim_s || to >= dim_s || from == to {
        return Err(Error::arg("transition needs two distinct system levels"));
    }
    if k == 0 || k >= dim_w {
        return Err(Error::construction("weight cannot absorb the transition"));
    }
    let n = dim_w * dim_s;
    if n > MAX_DIM {
        return Err(Error::Size { dim: n, max: MAX_DIM });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    for level in 0..dim_w - k {
        let a = level * dim_s + from;
        let b = (level + k) * dim_s + to;
        perm[a] = b;
        perm[b] = a;
    }
    let mut m = DMatrix::<C64>::zeros(n, n);
    for (j, &i) in perm.iter().enumerate() {
        m[(i, j)] = c(1.0);
    }
    Operator::from_matrix(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qop::tensor_product;
    use approx::assert_relative_eq;

    fn plus() -> PureState {
        PureState::basis(2, 0)
    }

    fn minus() -> PureState {
        PureState::basis(2, 1)
    }

    fn h_s(omega: f64) -> Operator {
        Operator::from_diagonal(&[omega / 2.0, -omega / 2.0])
    }

    fn record_projectors() -> Vec<Operator> {
        vec![Operator::projector(&plus()), Operator::projector(&minus())]
    }

    #[test]
    fn identity_feedback_composes_to_identity() {
        let s = compose_feedback_unitary(vec![Operator::identity(6); 2], record_projectors(), &[3, 2]).unwrap();
        assert_eq!(s.composed(), &Operator::identity(12));
    }

    #[test]
    fn incomplete_projectors_rejected() {
        let r = compose_feedback_unitary(
            vec![Operator::identity(6); 2],
            vec![Operator::projector(&plus()), Operator::zeros(2)],
            &[3, 2],
        );
        assert!(matches!(r, Err(Error::Construction(_))));
    }

    #[test]
    fn oscillator_weight_examples() {
        let w = build_oscillator_weight(1.0, 1, 6).unwrap();
        assert_eq!(w.initial(), &PureState::basis(6, 2));
        let w = build_oscillator_weight(1.0, 4, 16).unwrap();
        for k in 0..16 {
            let expect = if (2..=5).contains(&k) { 0.5 } else { 0.0 };
            assert_relative_eq!(w.initial().amplitude(k).re, expect, epsilon = 1e-15);
        }
        let w = build_oscillator_weight(1.0, 10, 14).unwrap();
        let oracle = (2..=11).map(|n| n as f64).sum::<f64>() / 10.0;
        assert_relative_eq!(oracle, 6.5);
        assert_relative_eq!(w.initial_state().diagonal_expectation(&w.energies()).unwrap(), oracle, epsilon = 1e-12);
        assert_relative_eq!(w.mean_energy(), oracle, epsilon = 1e-12);
        assert!(build_oscillator_weight(1.0, 10, 13).is_err());
    }

    #[test]
    fn example_one_shift_raises_weight() {
        let w = build_oscillator_weight(1.0, 20, 24).unwrap();
        let (up, _) = build_shift_unitaries(&plus(), &minus(), &plus(), &minus(), &w).unwrap();
        for n in 2..=22 {
            let input = PureState::basis(24, n).tensor(&plus()).unwrap();
            let expect = PureState::basis(24, n + 1).tensor(&minus()).unwrap();
            let got = up.apply(input.vector()).unwrap();
            assert!((got - expect.vector()).norm() < 1e-14);
        }
    }

    #[test]
    fn shift_conserves_energy_and_fixes_boundary() {
        let w = build_oscillator_weight(1.0, 5, 9).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let post_p = PureState::from_real(&[h, h]).unwrap();
        let post_m = PureState::from_real(&[h, -h]).unwrap();
        let htot = tensor_product(&w.hamiltonian().unwrap(), &Operator::identity(2))
            .unwrap()
            .add(&tensor_product(&Operator::identity(9), &h_s(1.0)).unwrap())
            .unwrap();
        for (pp, pm) in [(plus(), minus()), (post_p, post_m)] {
            let (up, um) = build_shift_unitaries(&plus(), &minus(), &pp, &pm, &w).unwrap();
            for u in [&up, &um] {
                assert!(u.is_unitary());
                assert!(commutator_norm(u, &htot).unwrap() <= EPS_ALG);
                for s in [plus(), minus()] {
                    let v = PureState::basis(9, 0).tensor(&s).unwrap();
                    assert!((u.apply(v.vector()).unwrap() - v.vector()).norm() < 1e-14);
                }
                let v = PureState::basis(9, 1).tensor(&minus()).unwrap();
                assert!((u.apply(v.vector()).unwrap() - v.vector()).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn sparse_apply_matches_dense() {
        let post = PureState::from_amplitudes(&[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let s = ShiftUnitary::new(10, &plus(), &minus(), &post).unwrap();
        let dense = s.to_operator().unwrap();
        let f = DMatrix::from_fn(20, 3, |i, j| C64::new((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.05));
        let a = s.apply(&f).unwrap();
        let b = dense.apply_matrix(&f).unwrap();
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn example_two_population() {
        let n = 50;
        let w = build_oscillator_weight(1.0, n, n + 4).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let post_p = PureState::from_real(&[h, h]).unwrap();
        let post_m = PureState::from_real(&[h, -h]).unwrap();
        let (up, um) = build_shift_unitaries(&plus(), &minus(), &post_p, &post_m, &w).unwrap();
        let scheme = compose_feedback_unitary(vec![up, um], record_projectors(), &[n + 4, 2]).unwrap();
        for (x, post) in [(0, &post_p), (1, &post_m)] {
            let out = conditional_feedback_maps(&scheme, x, &w.initial_state(), &post.density(), None).unwrap();
            assert_relative_eq!(out.system.population(&minus()).unwrap(), 0.99, epsilon = 1e-9);
        }
    }

    #[test]
    fn transition_is_energy_conserving_permutation() {
        let u = transition_unitary(6, 4, 2, 0, 2).unwrap();
        assert!(u.is_unitary());
        let hw = Operator::from_diagonal(&(0..6).map(|k| k as f64).collect::<Vec<_>>());
        let hs = Operator::from_diagonal(&[0.0, 1.0, 2.0, 3.0]);
        let htot = tensor_product(&hw, &Operator::identity(4))
            .unwrap()
            .add(&tensor_product(&Operator::identity(6), &hs).unwrap())
            .unwrap();
        assert!(commutator_norm(&u, &htot).unwrap() <= EPS_ALG);
    }

    #[test]
    fn form_and_probe_tests_detect_perturbation() {
        let w = build_oscillator_weight(1.0, 1, 5).unwrap();
        let (up, um) = build_shift_unitaries(&plus(), &minus(), &plus(), &minus(), &w).unwrap();
        let scheme = compose_feedback_unitary(vec![up, um], record_projectors(), &[5, 2]).unwrap();
        assert!(scheme.form_defect().unwrap() <= EPS_ALG);
        assert!(scheme.probe_defect().unwrap() <= EPS_ALG);
        let mut m = scheme.composed().matrix().clone();
        m[(0, 1)] += C64::new(1e-3, 0.0);
        let bad = Operator::from_matrix(m).unwrap();
        assert!(form_defect(&bad, &record_projectors(), &[5, 2]).unwrap() > 1e-4);
    }

    #[test]
    fn energy_report_itemizes_groups() {
        let w = build_oscillator_weight(1.0, 1, 5).unwrap();
        let (up, um) = build_shift_unitaries(&plus(), &minus(), &plus(), &minus(), &w).unwrap();
        let hw = w.hamiltonian().unwrap();
        let scheme = compose_feedback_unitary(vec![up.clone(), um], record_projectors(), &[5, 2]).unwrap();
        let rep = check_feedback_energy(&scheme, &hw, &h_s(1.0), &Operator::zeros(2), None).unwrap();
        assert!(rep.pass);
        assert!(rep.branch_commutators.iter().all(|&n| n <= EPS_ALG));
        // Records in a basis that does not commute with H_D.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let tilted = vec![
            Operator::projector(&PureState::from_real(&[h, h]).unwrap()),
            Operator::projector(&PureState::from_real(&[h, -h]).unwrap()),
        ];
        let (up2, um2) = build_shift_unitaries(&plus(), &minus(), &plus(), &minus(), &w).unwrap();
        let bad = compose_feedback_unitary(vec![up2, um2], tilted.clone(), &[5, 2]).unwrap();
        let hd = Operator::from_diagonal(&[1.0, -1.0]);
        assert!(!check_feedback_energy(&bad, &hw, &h_s(1.0), &hd, None).unwrap().pass);
        // Equal unitaries: completeness makes the projector sum commute.
        let same = compose_feedback_unitary(vec![up.clone(), up], tilted, &[5, 2]).unwrap();
        let rep = check_feedback_energy(&same, &hw, &h_s(1.0), &hd, None).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.equal_unitary_groups.len(), 1);
        assert!(rep.equal_unitary_groups[0].projector_commutator <= EPS_ALG);
    }
}
