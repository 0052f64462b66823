//! Thermodynamic bookkeeping: free energies, per-outcome and coarse-grained
//! work, the weight-entropy test, demon erasure and the net-work ledger.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::qop::{
    relative_entropy, thermal_state, von_neumann_entropy, DensityMatrix, FactoredState, Operator, PureState, EPS_EIG,
};

/// Slack allowed on every thermodynamic inequality.
pub const THERMO_TOL: f64 = 1e-9;

/// Minimum demon reset fidelity for an explicit erasure unitary.
pub const RESET_FIDELITY: f64 = 1.0 - 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThermoContext {
    temperature: f64,
    k_b: f64,
}

impl ThermoContext {
    pub fn new(temperature: f64, k_b: f64) -> Result<Self> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::arg(format!("temperature must be positive, got {temperature}")));
        }
        if !(k_b.is_finite() && k_b > 0.0) {
            return Err(Error::arg(format!("Boltzmann constant must be positive, got {k_b}")));
        }
        Ok(ThermoContext { temperature, k_b })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn k_b(&self) -> f64 {
        self.k_b
    }

    /// `K_B T`
    pub fn kt(&self) -> f64 {
        self.k_b * self.temperature
    }

    pub fn beta(&self) -> f64 {
        1.0 / self.kt()
    }
}

impl Default for ThermoContext {
    fn default() -> Self {
        ThermoContext { temperature: 1.0, k_b: 1.0 }
    }
}

/// Feature-3 threshold: work counts as strictly positive above this.
pub fn work_threshold(omega: f64, ctx: &ThermoContext) -> f64 {
    1e-9 * omega.max(ctx.kt())
}

/// `tr[Hρ] − K_B T S(ρ)`
pub fn free_energy(rho: &DensityMatrix, h: &Operator, ctx: &ThermoContext) -> Result<f64> {
    if !h.is_hermitian() {
        return Err(Error::arg("free energy needs a Hermitian Hamiltonian"));
    }
    Ok(rho.expectation(h)? - ctx.kt() * von_neumann_entropy(rho))
}

/// Weight Hamiltonian: explicit levels for large diagonal weights, a dense
/// operator otherwise.
#[derive(Clone, Debug)]
pub enum WeightHamiltonian {
    Levels(Vec<f64>),
    Dense(Operator),
}

impl WeightHamiltonian {
    pub fn dim(&self) -> usize {
        match self {
            WeightHamiltonian::Levels(e) => e.len(),
            WeightHamiltonian::Dense(h) => h.dim(),
        }
    }

    pub fn energy(&self, rho: &FactoredState) -> Result<f64> {
        match self {
            WeightHamiltonian::Levels(e) => rho.diagonal_expectation(e),
            WeightHamiltonian::Dense(h) => rho.expectation(h),
        }
    }

    pub fn to_operator(&self) -> Operator {
        match self {
            WeightHamiltonian::Levels(e) => Operator::from_diagonal(e),
            WeightHamiltonian::Dense(h) => h.clone(),
        }
    }
}

pub fn factored_free_energy(rho: &FactoredState, h: &WeightHamiltonian, ctx: &ThermoContext) -> Result<f64> {
    Ok(h.energy(rho)? - ctx.kt() * rho.entropy())
}

/// Work transferred into the weight: `F(after) − F(before)`.
pub fn work_per_outcome(
    before: &DensityMatrix,
    after: &DensityMatrix,
    h_w: &Operator,
    ctx: &ThermoContext,
) -> Result<f64> {
    if before.dim() != after.dim() || before.dim() != h_w.dim() {
        return Err(Error::arg("weight states and Hamiltonian disagree in dimension"));
    }
    Ok(free_energy(after, h_w, ctx)? - free_energy(before, h_w, ctx)?)
}

/// [`work_per_outcome`] for factored weight states.
pub fn weight_work(
    before: &FactoredState,
    after: &FactoredState,
    h_w: &WeightHamiltonian,
    ctx: &ThermoContext,
) -> Result<f64> {
    if before.dim() != after.dim() || before.dim() != h_w.dim() {
        return Err(Error::arg("weight states and Hamiltonian disagree in dimension"));
    }
    Ok(factored_free_energy(after, h_w, ctx)? - factored_free_energy(before, h_w, ctx)?)
}

/// System-side form of the branch work for a thermally isolated,
/// energy-conserving feedback: `tr[H_S(ρ̃_x − Λ_x[ρ̃_x])] + K_B T (S(ρ_W) − S(Λ_x*[ρ_W]))`.
pub fn system_side_work(
    post: &DensityMatrix,
    system_after: &DensityMatrix,
    h_s: &Operator,
    entropy_w_before: f64,
    entropy_w_after: f64,
    ctx: &ThermoContext,
) -> Result<f64> {
    let de = post.expectation(h_s)? - system_after.expectation(h_s)?;
    Ok(de + ctx.kt() * (entropy_w_before - entropy_w_after))
}

pub fn default_entropy_tolerance(dim: usize) -> f64 {
    1e-9 * (dim.max(2) as f64).ln()
}

#[derive(Clone, Debug, Serialize)]
pub struct Feature2Report {
    pub tolerance: f64,
    /// `|S(Λ_x*[ρ_W]) − S(ρ_W)|`
    pub deltas: Vec<f64>,
    pub pass: Vec<bool>,
}

impl Feature2Report {
    pub fn all_pass(&self) -> bool {
        self.pass.iter().all(|&p| p)
    }
}

/// Weight-entropy invariance per outcome; `tol_s` defaults to `1e-9·ln D_W`.
pub fn feature2_test(branch_weights: &[FactoredState], rho_w: &FactoredState, tol_s: Option<f64>) -> Feature2Report {
    let tolerance = tol_s.unwrap_or_else(|| default_entropy_tolerance(rho_w.dim()));
    let s0 = rho_w.entropy();
    let deltas: Vec<f64> = branch_weights.iter().map(|w| (w.entropy() - s0).abs()).collect();
    let pass = deltas.iter().map(|&d| d <= tolerance).collect();
    Feature2Report { tolerance, deltas, pass }
}

/// `⟨φ̃|H_S|φ̃⟩ − min σ(H_S)`: the most work an entropy-preserving,
/// thermally isolated feedback can extract from `φ̃`.
pub fn ground_energy_bound(post: &PureState, h_s: &Operator) -> Result<f64> {
    let spec = crate::qop::eigh(h_s)?;
    let e = h_s.matrix_element(post, post)?.re;
    Ok(e - spec.min())
}

/// Finite thermal reservoir and the erasure unitary on `D⊗R`.
#[derive(Clone, Debug)]
pub struct ExplicitReservoir {
    pub hamiltonian: Operator,
    pub unitary: Operator,
}

#[derive(Clone, Debug)]
pub enum ErasureMode {
    /// `Q = K_B T S(ρ_D')` with an exact reset.
    LandauerOptimal,
    Explicit(ExplicitReservoir),
}

impl ErasureMode {
    pub fn is_landauer_optimal(&self) -> bool {
        matches!(self, ErasureMode::LandauerOptimal)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ErasureResult {
    pub heat: f64,
    pub work_cost: f64,
    /// `Q − K_B T S(ρ_D')`
    pub landauer_slack: f64,
    pub reset_fidelity: f64,
    #[serde(skip)]
    pub reservoir_after: Option<DensityMatrix>,
}

/// Resets the demon to `ψ` and returns the heat dumped into the reservoir
/// and the total work cost `tr[H_D(|ψ⟩⟨ψ| − ρ_D')] + Q`.
pub fn erase_demon(
    rho_d: &DensityMatrix,
    psi: &PureState,
    h_d: &Operator,
    ctx: &ThermoContext,
    mode: &ErasureMode,
) -> Result<ErasureResult> {
    if rho_d.dim() != psi.dim() || h_d.dim() != psi.dim() {
        return Err(Error::arg("demon state, reset state and H_D disagree in dimension"));
    }
    let s_d = von_neumann_entropy(rho_d);
    let demon_energy = h_d.matrix_element(psi, psi)?.re - rho_d.expectation(h_d)?;
    let (heat, reset_fidelity, reservoir_after) = match mode {
        ErasureMode::LandauerOptimal => (ctx.kt() * s_d, 1.0, None),
        ErasureMode::Explicit(res) => {
            let d_d = rho_d.dim();
            let d_r = res.hamiltonian.dim();
            if res.unitary.dim() != d_d * d_r {
                return Err(Error::arg("erasure unitary does not act on D⊗R"));
            }
            if !res.unitary.is_unitary() {
                return Err(Error::arg("erasure unitary is not unitary"));
            }
            let tau = thermal_state(&res.hamiltonian, ctx.beta())?;
            let out = rho_d.tensor(&tau)?.evolve(&res.unitary)?;
            let dims = [d_d, d_r];
            let demon = DensityMatrix::from_matrix(crate::qop::partial_trace_dims(out.matrix(), &dims, &[0]))?;
            let fidelity = demon.population(psi)?;
            if fidelity < RESET_FIDELITY {
                return Err(Error::Erasure(format!("demon reset fidelity {fidelity} is below {RESET_FIDELITY}")));
            }
            let tau_after = DensityMatrix::from_matrix(crate::qop::partial_trace_dims(out.matrix(), &dims, &[1]))?;
            let q = tau_after.expectation(&res.hamiltonian)? - tau.expectation(&res.hamiltonian)?;
            // Landauer with an imperfect reset: Q ≥ K_B T (S(ρ_D') − S(ρ_D'')).
            let residual = von_neumann_entropy(&demon);
            if q < ctx.kt() * (s_d - residual) - THERMO_TOL {
                return Err(Error::Inconsistency(format!(
                    "erasure heat {q} violates the Landauer bound {}",
                    ctx.kt() * (s_d - residual)
                )));
            }
            (q, fidelity, Some(tau_after))
        }
    };
    Ok(ErasureResult {
        heat,
        work_cost: demon_energy + heat,
        landauer_slack: heat - ctx.kt() * s_d,
        reset_fidelity,
        reservoir_after,
    })
}

/// Reservoir of `2·band` levels, `band` at energy 0 and `band` at `gap`,
/// with the swap `|1⟩_D|r⟩ ↔ |0⟩_D|r + band⟩` resetting a qubit demon to `|0⟩`.
pub fn two_band_erasure(band: usize, gap: f64) -> Result<ExplicitReservoir> {
    if band == 0 || !(gap.is_finite() && gap > 0.0) {
        return Err(Error::arg("two-band reservoir needs a positive band size and gap"));
    }
    let d_r = 2 * band;
    let levels: Vec<f64> = (0..d_r).map(|r| if r < band { 0.0 } else { gap }).collect();
    let n = 2 * d_r;
    let mut perm: Vec<usize> = (0..n).collect();
    for r in 0..band {
        let a = d_r + r;
        let b = r + band;
        perm[a] = b;
        perm[b] = a;
    }
    let mut m = nalgebra::DMatrix::zeros(n, n);
    for (j, &i) in perm.iter().enumerate() {
        m[(i, j)] = crate::qop::c(1.0);
    }
    Ok(ExplicitReservoir { hamiltonian: Operator::from_diagonal(&levels), unitary: Operator::from_matrix(m)? })
}

#[derive(Clone, Debug, Serialize)]
pub struct LedgerEntry {
    pub outcome: usize,
    pub probability: f64,
    pub work: f64,
    pub entropy_change: f64,
    pub energy_change: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WorkLedger {
    pub entries: Vec<LedgerEntry>,
    pub w_coarse: f64,
    pub w_avg: f64,
    pub heat: f64,
    pub w_erasure: f64,
    pub w_net_coarse: f64,
    pub w_net_avg: f64,
    /// `F(ρ_S) − F(ρ_S')`
    pub bound_rhs_coarse: f64,
    /// `bound_rhs_coarse − w_net_coarse`
    pub second_law_slack: f64,
    /// `w_avg − w_coarse`
    pub concavity_gap: f64,
}

/// Everything the ledger needs from one cycle.
pub struct LedgerInput<'a> {
    pub probabilities: &'a [f64],
    pub rho_w: &'a FactoredState,
    pub branch_weights: &'a [FactoredState],
    pub h_w: &'a WeightHamiltonian,
    pub rho_s: &'a DensityMatrix,
    pub rho_s_after: &'a DensityMatrix,
    pub h_s: &'a Operator,
    pub erasure: &'a ErasureResult,
    pub landauer_optimal: bool,
    /// No reservoir took part in feedback.
    pub isolated_feedback: bool,
}

pub fn work_ledger(input: &LedgerInput, ctx: &ThermoContext) -> Result<WorkLedger> {
    if input.probabilities.len() != input.branch_weights.len() {
        return Err(Error::arg("one weight state per outcome is required"));
    }
    let kt = ctx.kt();
    let e0 = input.h_w.energy(input.rho_w)?;
    let s0 = input.rho_w.entropy();
    let mut entries = Vec::with_capacity(input.probabilities.len());
    for (x, (&p, w)) in input.probabilities.iter().zip(input.branch_weights).enumerate() {
        let energy_change = input.h_w.energy(w)? - e0;
        let entropy_change = w.entropy() - s0;
        entries.push(LedgerEntry {
            outcome: x,
            probability: p,
            work: energy_change - kt * entropy_change,
            entropy_change,
            energy_change,
        });
    }
    let w_avg: f64 = entries.iter().map(|e| e.probability * e.work).sum();
    let terms: Vec<(f64, &FactoredState)> = input
        .probabilities
        .iter()
        .zip(input.branch_weights)
        .filter(|(p, _)| **p > EPS_EIG)
        .map(|(&p, w)| (p, w))
        .collect();
    let rho_w_after = FactoredState::mixture(&terms)?;
    let w_coarse = weight_work(input.rho_w, &rho_w_after, input.h_w, ctx)?;
    if w_coarse > w_avg + THERMO_TOL {
        return Err(Error::Inconsistency(format!("coarse-grained work {w_coarse} exceeds average work {w_avg}")));
    }
    let bound_rhs_coarse = free_energy(input.rho_s, input.h_s, ctx)? - free_energy(input.rho_s_after, input.h_s, ctx)?;
    let w_erasure = input.erasure.work_cost;
    let w_net_coarse = w_coarse - w_erasure;
    if input.landauer_optimal && input.isolated_feedback && w_net_coarse > bound_rhs_coarse + THERMO_TOL {
        return Err(Error::Inconsistency(format!(
            "net coarse-grained work {w_net_coarse} exceeds the free-energy drop {bound_rhs_coarse}"
        )));
    }
    Ok(WorkLedger {
        entries,
        w_coarse,
        w_avg,
        heat: input.erasure.heat,
        w_erasure,
        w_net_coarse,
        w_net_avg: w_avg - w_erasure,
        bound_rhs_coarse,
        second_law_slack: bound_rhs_coarse - w_net_coarse,
        concavity_gap: w_avg - w_coarse,
    })
}

/// Every term of the reservoir-assisted work bound for one branch.
#[derive(Clone, Debug, Serialize)]
pub struct ReservoirBound {
    pub work: f64,
    /// `tr[H_R(τ_R − Λ_x'[τ_R])]`
    pub reservoir_energy_drop: f64,
    /// `K_B T (S(τ_R) − S(Λ_x'[τ_R]))`
    pub reservoir_entropy_drop: f64,
    /// `K_B T S(Λ_x'[τ_R] ‖ τ_R)`
    pub relative_entropy: f64,
    /// `tr[H_S(φ_x − Λ_x[φ_x])]`
    pub system_energy_drop: f64,
    /// `K_B T (S(ρ_W) − S(Λ_x*[ρ_W]))`
    pub weight_entropy_drop: f64,
    /// `K_B T (S(Λ_x[φ_x]) − S(Λ_x'[τ_R]‖τ_R)) + system_energy_drop`
    pub intermediate: f64,
    /// `K_B T S(Λ_x[φ_x]) + system_energy_drop`
    pub rhs: f64,
    /// `K_B T (S(Λ_x[φ_x]) + S(Λ_x'[τ_R]) + S(Λ_x*[ρ_W]) − S(τ_R) − S(ρ_W))`
    pub subadditivity_gap: f64,
}

impl ReservoirBound {
    pub fn slack(&self) -> f64 {
        self.rhs - self.work
    }
}

/// Per-branch data of a feedback that borrows heat from a reservoir.
pub struct ReservoirBranch<'a> {
    pub post: &'a DensityMatrix,
    pub system_after: &'a DensityMatrix,
    pub tau_r: &'a DensityMatrix,
    pub reservoir_after: &'a DensityMatrix,
    pub rho_w: &'a FactoredState,
    pub weight_after: &'a FactoredState,
}

/// Evaluates the reservoir-assisted chain and fails with an inconsistency if
/// any link is broken.
pub fn reservoir_assisted_bound(
    branch: &ReservoirBranch,
    h_s: &Operator,
    h_r: &Operator,
    h_w: &WeightHamiltonian,
    ctx: &ThermoContext,
) -> Result<ReservoirBound> {
    let kt = ctx.kt();
    let work = weight_work(branch.rho_w, branch.weight_after, h_w, ctx)?;
    let reservoir_energy_drop = branch.tau_r.expectation(h_r)? - branch.reservoir_after.expectation(h_r)?;
    let s_tau = von_neumann_entropy(branch.tau_r);
    let s_tau_after = von_neumann_entropy(branch.reservoir_after);
    let reservoir_entropy_drop = kt * (s_tau - s_tau_after);
    let relative_entropy = kt * relative_entropy(branch.reservoir_after, branch.tau_r)?;
    let system_energy_drop = branch.post.expectation(h_s)? - branch.system_after.expectation(h_s)?;
    let s_w = branch.rho_w.entropy();
    let s_w_after = branch.weight_after.entropy();
    let weight_entropy_drop = kt * (s_w - s_w_after);
    let s_sys = von_neumann_entropy(branch.system_after);
    let intermediate = kt * s_sys - relative_entropy + system_energy_drop;
    let rhs = kt * s_sys + system_energy_drop;
    let subadditivity_gap = kt * (s_sys + s_tau_after + s_w_after - s_tau - s_w);

    let check = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(Error::Inconsistency(format!("reservoir-assisted chain broken: {what}")))
        }
    };
    let conservation = reservoir_energy_drop + system_energy_drop + weight_entropy_drop;
    check((work - conservation).abs() <= THERMO_TOL, "work is not the energy released by S and R")?;
    check(
        (reservoir_energy_drop - (reservoir_entropy_drop - relative_entropy)).abs() <= THERMO_TOL,
        "reservoir energy does not split into entropy and relative entropy",
    )?;
    check(subadditivity_gap >= -THERMO_TOL, "subadditivity")?;
    check(work <= intermediate + weight_entropy_drop + THERMO_TOL, "entropy step")?;
    check(work <= rhs + weight_entropy_drop + THERMO_TOL, "final bound")?;
    Ok(ReservoirBound {
        work,
        reservoir_energy_drop,
        reservoir_entropy_drop,
        relative_entropy,
        system_energy_drop,
        weight_entropy_drop,
        intermediate,
        rhs,
        subadditivity_gap,
    })
}
