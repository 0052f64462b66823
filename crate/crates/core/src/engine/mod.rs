//! Full engine cycles: measure, objectify, feed back, erase; feature
//! evaluation and the impossibility scan.

mod scan;
mod scenarios;

pub use scan::{impossibility_scan, random_config, ScanFamily, ScanRecord, ScanReport};
pub use scenarios::{qubit_ladder_reservoir, scenario_library, ErasureChoice, ScenarioParams, SCENARIO_NAMES};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::feedback::{
    check_feedback_energy, conditional_feedback_maps, FeedbackEnergyReport, FeedbackScheme, OscillatorWeight,
};
use crate::measurement::{
    apply_instrument, branch_marginals, check_energy_conserving_measurement, check_repeatable,
    premeasure_and_objectify, way_witness, EnergyReport, Gemenge, Instrument, MeasurementModel, FIDELITY_TOL,
};
use crate::qop::{
    c, eigh, matmul, partial_trace_dims, tensor_all, thermal_state, von_neumann_entropy, DensityMatrix, FactoredState,
    Operator, PureState, C64, EPS_ALG, EPS_EIG, MAX_DIM,
};
use crate::thermo::{
    erase_demon, feature2_test, reservoir_assisted_bound, system_side_work, work_ledger, work_threshold, ErasureMode,
    ErasureResult, LedgerInput, ReservoirBound, ReservoirBranch, ThermoContext, WeightHamiltonian, WorkLedger,
    THERMO_TOL,
};

/// Largest `W⊗S⊗D[⊗R]` dimension for which the global state is assembled to
/// cross-check the objectification order and the marginals.
pub const GLOBAL_CHECK_DIM: usize = 2048;

#[derive(Clone, Debug)]
pub enum MeasurementStage {
    Model(MeasurementModel),
    /// Bare instrument, recorded in a classical register demon `|x⟩` with
    /// `H_D = 0` and `|ψ⟩ = |0⟩`.
    Instrument(Instrument),
}

impl MeasurementStage {
    pub fn outcomes(&self) -> usize {
        match self {
            MeasurementStage::Model(m) => m.target().len(),
            MeasurementStage::Instrument(i) => i.target().len(),
        }
    }

    pub fn system_dim(&self) -> usize {
        match self {
            MeasurementStage::Model(m) => m.system_dim(),
            MeasurementStage::Instrument(i) => i.dim(),
        }
    }

    pub fn demon_dim(&self) -> usize {
        match self {
            MeasurementStage::Model(m) => m.demon_dim(),
            MeasurementStage::Instrument(i) => i.target().len(),
        }
    }

    pub fn demon_hamiltonian(&self) -> Operator {
        match self {
            MeasurementStage::Model(m) => m.demon_hamiltonian().clone(),
            MeasurementStage::Instrument(i) => Operator::zeros(i.target().len()),
        }
    }

    pub fn demon_initial(&self) -> PureState {
        match self {
            MeasurementStage::Model(m) => m.demon_initial().clone(),
            MeasurementStage::Instrument(i) => PureState::basis(i.target().len(), 0),
        }
    }

    pub fn demon_projector(&self, x: usize) -> Operator {
        match self {
            MeasurementStage::Model(m) => m.pointer().projector(x).clone(),
            MeasurementStage::Instrument(i) => Operator::projector(&PureState::basis(i.target().len(), x)),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            MeasurementStage::Model(m) => m.labels(),
            MeasurementStage::Instrument(i) => i.target().labels(),
        }
    }

    fn target_nondegenerate(&self) -> bool {
        match self {
            MeasurementStage::Model(m) => m.target().is_nondegenerate(),
            MeasurementStage::Instrument(i) => i.target().is_nondegenerate(),
        }
    }

    fn target_projector(&self, x: usize) -> &Operator {
        match self {
            MeasurementStage::Model(m) => m.target().projector(x),
            MeasurementStage::Instrument(i) => i.target().projector(x),
        }
    }

    /// Branches with their `S⊗D` states, plus the premeasured state when a
    /// unitary model exists.
    fn run(&self, rho_s: &DensityMatrix) -> Result<(Option<DensityMatrix>, Vec<RawBranch>)> {
        match self {
            MeasurementStage::Model(model) => {
                let (pre, g) = premeasure_and_objectify(model, rho_s)?;
                let branches = g
                    .branches()
                    .iter()
                    .map(|b| {
                        let parts = b.state.as_ref().map(|s| {
                            let (sys, demon) = branch_marginals(model, s);
                            (s.clone(), sys, demon)
                        });
                        RawBranch { probability: b.probability, parts }
                    })
                    .collect();
                Ok((Some(pre), branches))
            }
            MeasurementStage::Instrument(instr) => {
                let g: Gemenge = apply_instrument(instr, rho_s)?;
                let d_d = instr.target().len();
                let branches = g
                    .branches()
                    .iter()
                    .map(|b| {
                        let parts = b.state.as_ref().map(|s| {
                            let demon = PureState::basis(d_d, b.index).density();
                            (s.tensor(&demon).expect("small register"), s.clone(), demon)
                        });
                        RawBranch { probability: b.probability, parts }
                    })
                    .collect();
                Ok((None, branches))
            }
        }
    }
}

struct RawBranch {
    probability: f64,
    /// `(σ_x on S⊗D, ρ̃_x, demon marginal)`
    parts: Option<(DensityMatrix, DensityMatrix, DensityMatrix)>,
}

#[derive(Clone, Debug)]
pub enum WeightSpec {
    Oscillator(OscillatorWeight),
    Generic { hamiltonian: Operator, state: DensityMatrix },
}

impl WeightSpec {
    pub fn dim(&self) -> usize {
        match self {
            WeightSpec::Oscillator(w) => w.dim(),
            WeightSpec::Generic { hamiltonian, .. } => hamiltonian.dim(),
        }
    }

    pub fn hamiltonian(&self) -> WeightHamiltonian {
        match self {
            WeightSpec::Oscillator(w) => WeightHamiltonian::Levels(w.energies()),
            WeightSpec::Generic { hamiltonian, .. } => WeightHamiltonian::Dense(hamiltonian.clone()),
        }
    }

    pub fn state(&self) -> FactoredState {
        match self {
            WeightSpec::Oscillator(w) => w.initial_state(),
            WeightSpec::Generic { state, .. } => FactoredState::from_density(state),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EngineFlags {
    pub degenerate_target: bool,
    pub reservoir_in_feedback: bool,
    /// Certification failures are recorded instead of rejected.
    pub non_conforming: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Repeatability fidelity slack.
    pub fidelity: f64,
    /// Weight-entropy slack; `None` means `1e-9·ln D_W`.
    pub entropy: Option<f64>,
    /// Energy scale entering the positive-work threshold.
    pub work_scale: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { fidelity: FIDELITY_TOL, entropy: None, work_scale: 1.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Certification {
    pub measurement: Option<EnergyReport>,
    pub feedback: FeedbackEnergyReport,
    /// `‖[M_S, H_S]‖`
    pub observable_commutator: f64,
}

impl Certification {
    pub fn pass(&self) -> bool {
        self.measurement.as_ref().is_none_or(|m| m.pass) && self.feedback.pass
    }
}

#[derive(Clone, Debug)]
pub struct EngineConfig {
    pub name: String,
    pub h_s: Operator,
    pub rho_s: DensityMatrix,
    pub measurement: MeasurementStage,
    pub feedback: FeedbackScheme,
    pub weight: WeightSpec,
    pub thermo: ThermoContext,
    pub erasure: ErasureMode,
    /// Reservoir Hamiltonian when a reservoir takes part in feedback.
    pub reservoir: Option<Operator>,
    pub flags: EngineFlags,
    pub tolerances: Tolerances,
    certification: Certification,
}

impl EngineConfig {
    /// Validates dimensions and certifies energy conservation of measurement
    /// and feedback. Certification failures are errors unless
    /// `flags.non_conforming` is set.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        h_s: Operator,
        rho_s: DensityMatrix,
        measurement: MeasurementStage,
        feedback: FeedbackScheme,
        weight: WeightSpec,
        thermo: ThermoContext,
        erasure: ErasureMode,
        reservoir: Option<Operator>,
        mut flags: EngineFlags,
        tolerances: Tolerances,
    ) -> Result<Self> {
        let name = name.into();
        let d_s = measurement.system_dim();
        if h_s.dim() != d_s || rho_s.dim() != d_s {
            return Err(Error::arg("system Hamiltonian or state does not match the measurement"));
        }
        if !h_s.is_hermitian() {
            return Err(Error::arg("system Hamiltonian is not Hermitian"));
        }
        if feedback.outcomes() != measurement.outcomes() {
            return Err(Error::arg("feedback and measurement disagree on the outcome count"));
        }
        if feedback.demon_dim() != measurement.demon_dim() {
            return Err(Error::arg("feedback and measurement disagree on the demon dimension"));
        }
        let dims = feedback.branch_dims();
        if dims[0] != weight.dim() || dims[1] != d_s {
            return Err(Error::arg("feedback branch space does not match weight and system"));
        }
        if reservoir.is_some() != feedback.has_reservoir() {
            return Err(Error::arg("reservoir Hamiltonian must be given exactly for reservoir schemes"));
        }
        if let Some(h_r) = &reservoir {
            if h_r.dim() != dims[2] || !h_r.is_hermitian() {
                return Err(Error::arg("reservoir Hamiltonian does not match the feedback scheme"));
            }
        }
        for x in 0..measurement.outcomes() {
            let p = measurement.demon_projector(x);
            if p.sub(&feedback.demon_projectors()[x])?.operator_norm() > EPS_ALG {
                return Err(Error::arg(format!("feedback projector {x} is not the pointer projector")));
            }
        }
        flags.degenerate_target = !measurement.target_nondegenerate();
        flags.reservoir_in_feedback = reservoir.is_some();

        let h_d = measurement.demon_hamiltonian();
        let h_w = weight.hamiltonian().to_operator();
        let measurement_report = match &measurement {
            MeasurementStage::Model(m) => Some(check_energy_conserving_measurement(m, &h_s, &h_d)?),
            MeasurementStage::Instrument(_) => None,
        };
        let feedback_report = check_feedback_energy(&feedback, &h_w, &h_s, &h_d, reservoir.as_ref())?;
        let observable_commutator = match &measurement {
            MeasurementStage::Model(m) => way_witness(m, &h_s, &h_d)?.observable_commutator,
            MeasurementStage::Instrument(i) => crate::qop::commutator_norm(&i.target().operator(), &h_s)?,
        };
        let certification =
            Certification { measurement: measurement_report, feedback: feedback_report, observable_commutator };
        if !certification.pass() && !flags.non_conforming {
            return Err(Error::Certification(format!(
                "{}: measurement commutator {:?}, feedback commutator {}",
                name,
                certification.measurement.as_ref().map(|m| m.unitary_commutator),
                certification.feedback.total_commutator
            )));
        }
        Ok(EngineConfig {
            name,
            h_s,
            rho_s,
            measurement,
            feedback,
            weight,
            thermo,
            erasure,
            reservoir,
            flags,
            tolerances,
            certification,
        })
    }

    pub fn certification(&self) -> &Certification {
        &self.certification
    }

    /// Non-degenerate, thermally isolated during feedback and certified.
    pub fn is_conforming(&self) -> bool {
        !self.flags.degenerate_target && !self.flags.reservoir_in_feedback && self.certification.pass()
    }

    pub fn with_rho_s(mut self, rho_s: DensityMatrix) -> Result<Self> {
        if rho_s.dim() != self.h_s.dim() {
            return Err(Error::arg("system state has the wrong dimension"));
        }
        self.rho_s = rho_s;
        Ok(self)
    }

    pub fn with_tolerances(mut self, tolerances: Tolerances) -> Self {
        self.tolerances = tolerances;
        self
    }

    pub fn with_erasure(mut self, erasure: ErasureMode) -> Self {
        self.erasure = erasure;
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchResult {
    pub index: usize,
    pub label: String,
    pub probability: f64,
    #[serde(skip)]
    pub post_system: DensityMatrix,
    #[serde(skip)]
    pub system_after: DensityMatrix,
    #[serde(skip)]
    pub weight_after: FactoredState,
    #[serde(skip)]
    pub reservoir_after: Option<DensityMatrix>,
    pub work: f64,
    pub entropy_change: f64,
    /// System-side form of the work; only for isolated, certified feedback.
    pub system_side_work: Option<f64>,
    /// `tr[H_S ρ̃_x] − min σ(H_S)`
    pub ground_energy_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CycleResult {
    pub name: String,
    pub branches: Vec<BranchResult>,
    #[serde(skip)]
    pub rho_s_after: DensityMatrix,
    #[serde(skip)]
    pub rho_w_after: FactoredState,
    #[serde(skip)]
    pub rho_d_after: DensityMatrix,
    #[serde(skip)]
    pub rho_r_after: Option<DensityMatrix>,
    pub erasure: ErasureResult,
    pub ledger: WorkLedger,
    /// `‖V O(ρ) V† − O(V ρ V†)‖_F`; `None` above [`GLOBAL_CHECK_DIM`] or
    /// without a unitary measurement model.
    pub order_defect: Option<f64>,
    /// Largest distance between global marginals and branch mixtures.
    pub marginal_defect: Option<f64>,
    /// `S(ρ_W') + S(ρ_S') + S(ρ_D') [+ S(ρ_R')] − S(ρ_W) − S(ρ_S) [− S(τ_R)]`
    pub entropy_chain_slack: f64,
    pub reservoir_bounds: Option<Vec<ReservoirBound>>,
}

impl CycleResult {
    pub fn probabilities(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.probability).collect()
    }

    pub fn works(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.work).collect()
    }
}

fn conditional_fallback(stage: &MeasurementStage, x: usize) -> Result<(DensityMatrix, DensityMatrix)> {
    // Zero-probability outcome: use the conditional state of the normalized
    // outcome projector, which is what the branch would hold if it occurred.
    let p = stage.target_projector(x);
    let rank = p.trace().re;
    let rho = DensityMatrix::from_matrix(p.matrix() / c(rank))?;
    let (_, raw) = stage.run(&rho)?;
    let (_, sys, demon) = raw[x]
        .parts
        .clone()
        .ok_or_else(|| Error::Inconsistency(format!("outcome {x} is unreachable from its own subspace")))?;
    Ok((sys, demon))
}

fn mixture(terms: &[(f64, &DensityMatrix)]) -> Result<DensityMatrix> {
    let dim = terms[0].1.dim();
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for (p, rho) in terms {
        m += rho.matrix() * c(*p);
    }
    DensityMatrix::from_matrix(m)
}

/// Runs one engine cycle.
pub fn run_cycle(config: &EngineConfig) -> Result<CycleResult> {
    let ctx = &config.thermo;
    let stage = &config.measurement;
    let labels = stage.labels();
    let (premeasured, raw) = stage.run(&config.rho_s)?;
    let rho_w = config.weight.state();
    let h_w = config.weight.hamiltonian();
    let tau_r = match &config.reservoir {
        Some(h_r) => Some(thermal_state(h_r, ctx.beta())?),
        None => None,
    };
    let e_min = eigh(&config.h_s)?.min();
    let s_w = rho_w.entropy();
    let isolated_certified = !config.flags.reservoir_in_feedback && config.certification.pass();

    let mut branches = Vec::with_capacity(raw.len());
    let mut demons = Vec::with_capacity(raw.len());
    for (x, rb) in raw.iter().enumerate() {
        let (post, demon) = match &rb.parts {
            Some((_, sys, demon)) => (sys.clone(), demon.clone()),
            None => conditional_fallback(stage, x)?,
        };
        let maps = conditional_feedback_maps(&config.feedback, x, &rho_w, &post, tau_r.as_ref())?;
        let work = crate::thermo::weight_work(&rho_w, &maps.weight, &h_w, ctx)?;
        let s_after = maps.weight.entropy();
        let ground_energy_bound = post.expectation(&config.h_s)? - e_min;
        let side = if isolated_certified {
            let w2 = system_side_work(&post, &maps.system, &config.h_s, s_w, s_after, ctx)?;
            if (w2 - work).abs() > THERMO_TOL {
                return Err(Error::Inconsistency(format!(
                    "outcome {x}: weight-side work {work} and system-side work {w2} differ"
                )));
            }
            // Isolated feedback cannot hand the weight more energy than the
            // system holds above its ground state.
            let de = work + ctx.kt() * (s_after - s_w);
            if de > ground_energy_bound + THERMO_TOL {
                return Err(Error::Inconsistency(format!(
                    "outcome {x}: weight energy gain {de} exceeds the ground-state bound {ground_energy_bound}"
                )));
            }
            Some(w2)
        } else {
            None
        };
        branches.push(BranchResult {
            index: x,
            label: labels[x].clone(),
            probability: rb.probability,
            post_system: post,
            system_after: maps.system,
            weight_after: maps.weight,
            reservoir_after: maps.reservoir,
            work,
            entropy_change: s_after - s_w,
            system_side_work: side,
            ground_energy_bound,
        });
        demons.push(demon);
    }

    let populated: Vec<usize> = (0..branches.len()).filter(|&x| branches[x].probability > EPS_EIG).collect();
    let weighted = |f: &dyn Fn(&BranchResult) -> &DensityMatrix| -> Result<DensityMatrix> {
        let terms: Vec<(f64, &DensityMatrix)> =
            populated.iter().map(|&x| (branches[x].probability, f(&branches[x]))).collect();
        mixture(&terms)
    };
    let rho_s_after = weighted(&|b| &b.system_after)?;
    let rho_d_after = {
        let terms: Vec<(f64, &DensityMatrix)> =
            populated.iter().map(|&x| (branches[x].probability, &demons[x])).collect();
        mixture(&terms)?
    };
    let rho_r_after = match tau_r {
        Some(_) => Some(weighted(&|b| b.reservoir_after.as_ref().expect("reservoir branch"))?),
        None => None,
    };
    let weight_terms: Vec<(f64, &FactoredState)> =
        populated.iter().map(|&x| (branches[x].probability, &branches[x].weight_after)).collect();
    let rho_w_after = FactoredState::mixture(&weight_terms)?;

    let psi = stage.demon_initial();
    let h_d = stage.demon_hamiltonian();
    let erasure = erase_demon(&rho_d_after, &psi, &h_d, ctx, &config.erasure)?;

    let probabilities: Vec<f64> = branches.iter().map(|b| b.probability).collect();
    let branch_weights: Vec<FactoredState> = branches.iter().map(|b| b.weight_after.clone()).collect();
    let ledger = work_ledger(
        &LedgerInput {
            probabilities: &probabilities,
            rho_w: &rho_w,
            branch_weights: &branch_weights,
            h_w: &h_w,
            rho_s: &config.rho_s,
            rho_s_after: &rho_s_after,
            h_s: &config.h_s,
            erasure: &erasure,
            landauer_optimal: config.erasure.is_landauer_optimal(),
            isolated_feedback: isolated_certified,
        },
        ctx,
    )?;

    let mut before = s_w + von_neumann_entropy(&config.rho_s);
    let mut after = rho_w_after.entropy() + von_neumann_entropy(&rho_s_after) + von_neumann_entropy(&rho_d_after);
    if let (Some(t), Some(r)) = (&tau_r, &rho_r_after) {
        before += von_neumann_entropy(t);
        after += von_neumann_entropy(r);
    }
    let entropy_chain_slack = after - before;
    if entropy_chain_slack < -THERMO_TOL {
        return Err(Error::Inconsistency(format!("entropy chain violated by {entropy_chain_slack}")));
    }

    let reservoir_bounds = match (&config.reservoir, &tau_r) {
        (Some(h_r), Some(tau)) => Some(
            branches
                .iter()
                .map(|b| {
                    reservoir_assisted_bound(
                        &ReservoirBranch {
                            post: &b.post_system,
                            system_after: &b.system_after,
                            tau_r: tau,
                            reservoir_after: b.reservoir_after.as_ref().expect("reservoir branch"),
                            rho_w: &rho_w,
                            weight_after: &b.weight_after,
                        },
                        &config.h_s,
                        h_r,
                        &h_w,
                        ctx,
                    )
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        _ => None,
    };

    let mut result = CycleResult {
        name: config.name.clone(),
        branches,
        rho_s_after,
        rho_w_after,
        rho_d_after,
        rho_r_after,
        erasure,
        ledger,
        order_defect: None,
        marginal_defect: None,
        entropy_chain_slack,
        reservoir_bounds,
    };
    if let Some(pre) = premeasured {
        let total = config.feedback.composed().dim();
        if total <= GLOBAL_CHECK_DIM {
            global_checks(config, &pre, &rho_w, tau_r.as_ref(), &mut result)?;
        }
    }
    Ok(result)
}

/// Assembles `ρ_W ⊗ σ_SD [⊗ τ_R]`, compares both objectification orders
/// and the global marginals against the branch mixtures.
fn global_checks(
    config: &EngineConfig,
    premeasured: &DensityMatrix,
    rho_w: &FactoredState,
    tau_r: Option<&DensityMatrix>,
    result: &mut CycleResult,
) -> Result<()> {
    let mut joint = rho_w.to_density()?.tensor(premeasured)?;
    if let Some(t) = tau_r {
        joint = joint.tensor(t)?;
    }
    let dims = config.feedback.global_dims();
    let n = joint.dim();
    let d_w = dims[0];
    let d_s = dims[1];
    let tail: usize = dims[3..].iter().product();
    let lifted: Vec<DMatrix<C64>> = (0..config.measurement.outcomes())
        .map(|x| {
            let p = config.measurement.demon_projector(x);
            tensor_all(&[&Operator::identity(d_w * d_s), &p, &Operator::identity(tail)]).map(Operator::into_matrix)
        })
        .collect::<Result<_>>()?;
    let objectify = |m: &DMatrix<C64>| {
        let mut out = DMatrix::<C64>::zeros(n, n);
        for p in &lifted {
            out += matmul(&matmul(p, m), p);
        }
        out
    };
    let v = config.feedback.composed().matrix();
    let v_adj = v.adjoint();
    let evolve = |m: &DMatrix<C64>| matmul(&matmul(v, m), &v_adj);
    let objectified_first = evolve(&objectify(joint.matrix()));
    let fed_first = objectify(&evolve(joint.matrix()));
    result.order_defect = Some((&objectified_first - &fed_first).norm());

    let marginal = |keep: usize| partial_trace_dims(&objectified_first, &dims, &[keep]);
    let mut defect = (marginal(1) - result.rho_s_after.matrix()).norm();
    defect = defect.max((marginal(2) - result.rho_d_after.matrix()).norm());
    let w_mix = result.rho_w_after.to_density()?;
    defect = defect.max((marginal(0) - w_mix.matrix()).norm());
    if let Some(r) = &result.rho_r_after {
        defect = defect.max((marginal(3) - r.matrix()).norm());
    }
    if defect > EPS_ALG {
        return Err(Error::Inconsistency(format!("global marginals differ from branch mixtures by {defect}")));
    }
    result.marginal_defect = Some(defect);
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct FeatureReport {
    pub f1_repeatable: bool,
    pub repeatability_fidelities: Vec<f64>,
    pub f2_entropy_invariant: bool,
    pub entropy_changes: Vec<f64>,
    pub entropy_tolerance: f64,
    pub f3_positive_work: bool,
    /// Minimum work over outcomes with nonzero probability.
    pub min_work: f64,
    pub work_threshold: f64,
    pub degenerate_target: bool,
    pub reservoir_in_feedback: bool,
    /// Whether the three-feature exclusion was asserted for this run.
    pub exclusion_checked: bool,
}

impl FeatureReport {
    pub fn triple(&self) -> (bool, bool, bool) {
        (self.f1_repeatable, self.f2_entropy_invariant, self.f3_positive_work)
    }
}

/// Evaluates the three features. On a conforming configuration all three
/// holding at once is reported as an internal inconsistency.
pub fn evaluate_features(result: &CycleResult, config: &EngineConfig) -> Result<FeatureReport> {
    let tol = &config.tolerances;
    let repeatability_fidelities = match &config.measurement {
        MeasurementStage::Model(m) => check_repeatable(m).fidelities,
        MeasurementStage::Instrument(i) => vec![1.0 - i.support_leakage(); i.target().len()],
    };
    let f1 = repeatability_fidelities.iter().all(|&f| f >= 1.0 - tol.fidelity);
    let weights: Vec<FactoredState> = result.branches.iter().map(|b| b.weight_after.clone()).collect();
    let f2 = feature2_test(&weights, &config.weight.state(), tol.entropy);
    let threshold = work_threshold(tol.work_scale, &config.thermo);
    let min_work =
        result.branches.iter().filter(|b| b.probability > EPS_EIG).map(|b| b.work).fold(f64::INFINITY, f64::min);
    let report = FeatureReport {
        f1_repeatable: f1,
        repeatability_fidelities,
        f2_entropy_invariant: f2.all_pass(),
        entropy_changes: f2.deltas,
        entropy_tolerance: f2.tolerance,
        f3_positive_work: min_work > threshold,
        min_work,
        work_threshold: threshold,
        degenerate_target: config.flags.degenerate_target,
        reservoir_in_feedback: config.flags.reservoir_in_feedback,
        exclusion_checked: config.is_conforming(),
    };
    if report.exclusion_checked && report.f1_repeatable && report.f2_entropy_invariant && report.f3_positive_work {
        return Err(Error::Inconsistency(format!(
            "{}: conforming engine satisfies all three features (min work {min_work})",
            config.name
        )));
    }
    Ok(report)
}

/// Shared check that the global feedback space stays dense-representable.
pub(crate) fn check_global_dim(dims: &[usize]) -> Result<()> {
    let n: usize = dims.iter().product();
    if n > MAX_DIM {
        return Err(Error::Size { dim: n, max: MAX_DIM });
    }
    Ok(())
}
