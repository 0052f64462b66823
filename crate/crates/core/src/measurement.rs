//! Measurement models `(H_D, |ψ⟩, U_M, Z_D)`, premeasurement and Lüders
//! objectification, energy and repeatability certification, and instruments
//! for degenerate observables.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qop::{
    c, commutator_norm, complete_unitary, eigh, energy_blocks, matmul, partial_trace_dims, tensor_product,
    DensityMatrix, Operator, PureState, C64, EPS_ALG, EPS_EIG,
};

/// Tolerance on fidelities and subspace supports.
pub const FIDELITY_TOL: f64 = 1e-9;

/// One spectral pair `(x, P^x)`.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub label: String,
    pub value: f64,
    pub projector: Operator,
}

/// Projective observable `Σ_x x P^x`.
#[derive(Clone, Debug)]
pub struct Observable {
    outcomes: Vec<Outcome>,
}

impl Observable {
    pub fn new(outcomes: Vec<Outcome>) -> Result<Self> {
        let first = outcomes.first().ok_or_else(|| Error::arg("observable needs outcomes"))?;
        let dim = first.projector.dim();
        let mut sum = Operator::zeros(dim);
        for (i, o) in outcomes.iter().enumerate() {
            if o.projector.dim() != dim {
                return Err(Error::arg("projectors act on different spaces"));
            }
            if !o.projector.is_projector() {
                return Err(Error::arg(format!("outcome {} is not a projector", o.label)));
            }
            if outcomes[..i].iter().any(|p| p.label == o.label) {
                return Err(Error::arg(format!("duplicate outcome label {}", o.label)));
            }
            for p in &outcomes[..i] {
                if p.projector.mul(&o.projector)?.operator_norm() > EPS_ALG {
                    return Err(Error::arg(format!("projectors {} and {} overlap", p.label, o.label)));
                }
            }
            sum = sum.add(&o.projector)?;
        }
        if sum.sub(&Operator::identity(dim))?.operator_norm() > EPS_ALG {
            return Err(Error::arg("projectors do not resolve the identity"));
        }
        Ok(Observable { outcomes })
    }

    /// Rank-one projectors onto an orthonormal basis.
    pub fn from_basis(labels: &[&str], values: &[f64], basis: &[PureState]) -> Result<Self> {
        if labels.len() != basis.len() || values.len() != basis.len() {
            return Err(Error::arg("labels, values and basis differ in length"));
        }
        Observable::new(
            basis
                .iter()
                .zip(labels.iter().zip(values))
                .map(|(v, (l, &x))| Outcome { label: l.to_string(), value: x, projector: Operator::projector(v) })
                .collect(),
        )
    }

    /// Projectors onto spans of the given vectors.
    pub fn from_subspaces(labels: &[&str], values: &[f64], spans: &[Vec<PureState>]) -> Result<Self> {
        if labels.len() != spans.len() || values.len() != spans.len() {
            return Err(Error::arg("labels, values and subspaces differ in length"));
        }
        let mut outcomes = Vec::new();
        for ((l, &x), span) in labels.iter().zip(values).zip(spans) {
            let dim = span.first().ok_or_else(|| Error::arg("empty subspace"))?.dim();
            let mut p = Operator::zeros(dim);
            for v in span {
                p = p.add(&Operator::projector(v))?;
            }
            outcomes.push(Outcome { label: l.to_string(), value: x, projector: p });
        }
        Observable::new(outcomes)
    }

    pub fn dim(&self) -> usize {
        self.outcomes[0].projector.dim()
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn labels(&self) -> Vec<String> {
        self.outcomes.iter().map(|o| o.label.clone()).collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o.label == label)
    }

    pub fn projector(&self, index: usize) -> &Operator {
        &self.outcomes[index].projector
    }

    pub fn rank(&self, index: usize) -> usize {
        self.outcomes[index].projector.trace().re.round() as usize
    }

    pub fn is_nondegenerate(&self) -> bool {
        (0..self.len()).all(|i| self.rank(i) == 1)
    }

    /// `Σ_x x P^x`
    pub fn operator(&self) -> Operator {
        let mut acc = Operator::zeros(self.dim());
        for o in &self.outcomes {
            acc = acc.add(&o.projector.scale(o.value)).expect("dimensions agree");
        }
        acc
    }

    /// Orthonormal basis of `range(P^x)`.
    pub fn range_basis(&self, index: usize) -> Vec<DVector<C64>> {
        let spec = eigh(self.projector(index)).expect("projectors are Hermitian");
        spec.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.5)
            .map(|(k, _)| spec.vectors.column(k).into_owned())
            .collect()
    }

    /// `‖(1 − P^x)|v⟩‖`
    pub fn leakage(&self, index: usize, v: &PureState) -> f64 {
        let pv = self.projector(index).apply(v.vector()).expect("dimension checked by caller");
        (v.vector() - pv).norm()
    }
}

/// The tuple `(H_D, |ψ⟩, U_M, Z_D)` together with the measured observable
/// and the intended post-measurement states and records.
#[derive(Clone, Debug)]
pub struct MeasurementModel {
    target: Observable,
    pointer: Observable,
    demon_hamiltonian: Operator,
    demon_initial: PureState,
    premeasurement: Operator,
    basis: Vec<Vec<PureState>>,
    post_states: Vec<Vec<PureState>>,
    records: Vec<Vec<PureState>>,
}

/// Input data of a premeasurement `|φ_x^α⟩⊗|ψ⟩ ↦ |φ̃_x^α⟩⊗|ψ_x^α⟩`.
///
/// For a non-degenerate target each outcome carries exactly one basis vector,
/// post vector and record.
#[derive(Clone, Debug)]
pub struct PremeasurementData {
    pub target: Observable,
    /// `|φ_x^α⟩` per outcome, spanning `range(P_S^x)`.
    pub basis: Vec<Vec<PureState>>,
    /// `|φ̃_x^α⟩` per outcome.
    pub post_states: Vec<Vec<PureState>>,
    /// `|ψ_x^α⟩ ∈ range(P_D^x)` per outcome.
    pub records: Vec<Vec<PureState>>,
    pub pointer: Observable,
    pub demon_initial: PureState,
    pub demon_hamiltonian: Operator,
}

/// Builds `U_M` for a non-degenerate target with one record per outcome. The
/// measured basis is read off the rank-one projectors. When `system_hamiltonian`
/// is given the completion is blockwise in the eigenspaces of `H_S + H_D`.
pub fn build_standard_premeasurement(
    target: &Observable,
    post_states: &[PureState],
    pointer: &Observable,
    records: &[PureState],
    demon_initial: &PureState,
    demon_hamiltonian: &Operator,
    system_hamiltonian: Option<&Operator>,
) -> Result<MeasurementModel> {
    if !target.is_nondegenerate() {
        return Err(Error::arg("standard premeasurement needs a non-degenerate target"));
    }
    let basis = (0..target.len())
        .map(|i| {
            let v = target.range_basis(i).remove(0);
            vec![PureState::new(v).expect("eigenvector is normalized").with_canonical_phase()]
        })
        .collect();
    build_premeasurement(
        PremeasurementData {
            target: target.clone(),
            basis,
            post_states: post_states.iter().map(|p| vec![p.clone()]).collect(),
            records: records.iter().map(|r| vec![r.clone()]).collect(),
            pointer: pointer.clone(),
            demon_initial: demon_initial.clone(),
            demon_hamiltonian: demon_hamiltonian.clone(),
        },
        system_hamiltonian,
    )
}

/// General premeasurement, including the coarse-grained degenerate form.
pub fn build_premeasurement(
    data: PremeasurementData,
    system_hamiltonian: Option<&Operator>,
) -> Result<MeasurementModel> {
    let n_out = data.target.len();
    if data.pointer.len() != n_out {
        return Err(Error::arg("pointer and target have different outcome counts"));
    }
    if data.basis.len() != n_out || data.post_states.len() != n_out || data.records.len() != n_out {
        return Err(Error::arg("per-outcome data has the wrong number of entries"));
    }
    let d_s = data.target.dim();
    let d_d = data.pointer.dim();
    if data.demon_initial.dim() != d_d || data.demon_hamiltonian.dim() != d_d {
        return Err(Error::arg("demon state or Hamiltonian has the wrong dimension"));
    }
    if !data.demon_hamiltonian.is_hermitian() {
        return Err(Error::arg("demon Hamiltonian is not Hermitian"));
    }
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for x in 0..n_out {
        let k = data.target.rank(x);
        if data.basis[x].len() != k || data.post_states[x].len() != k || data.records[x].len() != k {
            return Err(Error::arg(format!(
                "outcome {} needs {k} basis vectors, post states and records",
                data.target.outcomes()[x].label
            )));
        }
        for a in 0..k {
            let phi = &data.basis[x][a];
            let post = &data.post_states[x][a];
            let rec = &data.records[x][a];
            if phi.dim() != d_s || post.dim() != d_s || rec.dim() != d_d {
                return Err(Error::arg("vector dimension mismatch in premeasurement data"));
            }
            if (post.vector().norm() - 1.0).abs() > EPS_ALG {
                return Err(Error::arg("post-measurement state is not normalized"));
            }
            if data.target.leakage(x, phi) > FIDELITY_TOL {
                return Err(Error::arg("basis vector outside its outcome subspace"));
            }
            if data.pointer.leakage(x, rec) > FIDELITY_TOL {
                return Err(Error::arg("record outside its pointer subspace"));
            }
            inputs.push(phi.vector().kronecker(data.demon_initial.vector()));
            outputs.push(post.vector().kronecker(rec.vector()));
        }
    }
    let dim = d_s * d_d;
    let blocks = match system_hamiltonian {
        Some(hs) => {
            if hs.dim() != d_s {
                return Err(Error::arg("system Hamiltonian has the wrong dimension"));
            }
            let htot = tensor_product(hs, &Operator::identity(d_d))?
                .add(&tensor_product(&Operator::identity(d_s), &data.demon_hamiltonian)?)?;
            energy_blocks(&htot, block_tolerance(&htot))?
        }
        None => vec![crate::qop::Block::Coordinates((0..dim).collect())],
    };
    let u = complete_unitary(dim, &inputs, &outputs, &blocks).map_err(|e| match e {
        Error::Construction(m) => Error::construction(format!("premeasurement: {m}")),
        other => other,
    })?;
    Ok(MeasurementModel {
        target: data.target,
        pointer: data.pointer,
        demon_hamiltonian: data.demon_hamiltonian,
        demon_initial: data.demon_initial,
        premeasurement: u,
        basis: data.basis,
        post_states: data.post_states,
        records: data.records,
    })
}

pub(crate) fn block_tolerance(h: &Operator) -> f64 {
    1e-8 * h.operator_norm().max(1.0)
}

impl MeasurementModel {
    /// Wraps an explicit `U_M`, checking unitarity and the prescribed mapping.
    pub fn from_parts(data: PremeasurementData, premeasurement: Operator) -> Result<Self> {
        let d_s = data.target.dim();
        let d_d = data.pointer.dim();
        if premeasurement.dim() != d_s * d_d {
            return Err(Error::arg("premeasurement dimension does not match S⊗D"));
        }
        if !premeasurement.is_unitary() {
            return Err(Error::arg("premeasurement is not unitary"));
        }
        let model = MeasurementModel {
            target: data.target,
            pointer: data.pointer,
            demon_hamiltonian: data.demon_hamiltonian,
            demon_initial: data.demon_initial,
            premeasurement,
            basis: data.basis,
            post_states: data.post_states,
            records: data.records,
        };
        model.check_mapping()?;
        Ok(model)
    }

    /// Worst fidelity of `U_M(|φ_x^α⟩⊗|ψ⟩)` with `|φ̃_x^α⟩⊗|ψ_x^α⟩`; errors
    /// below `1 − 1e-9`.
    pub fn check_mapping(&self) -> Result<f64> {
        let mut worst: f64 = 1.0;
        for x in 0..self.target.len() {
            for ((phi, post), rec) in self.basis[x].iter().zip(&self.post_states[x]).zip(&self.records[x]) {
                let out = self.premeasurement.apply(&phi.vector().kronecker(self.demon_initial.vector()))?;
                let expect = post.vector().kronecker(rec.vector());
                worst = worst.min(expect.dotc(&out).norm_sqr());
            }
        }
        if worst < 1.0 - FIDELITY_TOL {
            return Err(Error::arg(format!("premeasurement mapping fidelity {worst} too low")));
        }
        Ok(worst)
    }

    pub fn target(&self) -> &Observable {
        &self.target
    }

    pub fn pointer(&self) -> &Observable {
        &self.pointer
    }

    pub fn demon_hamiltonian(&self) -> &Operator {
        &self.demon_hamiltonian
    }

    pub fn demon_initial(&self) -> &PureState {
        &self.demon_initial
    }

    pub fn premeasurement(&self) -> &Operator {
        &self.premeasurement
    }

    /// Measured basis `|φ_x^α⟩` per outcome.
    pub fn basis(&self) -> &[Vec<PureState>] {
        &self.basis
    }

    pub fn post_states(&self) -> &[Vec<PureState>] {
        &self.post_states
    }

    pub fn records(&self) -> &[Vec<PureState>] {
        &self.records
    }

    pub fn system_dim(&self) -> usize {
        self.target.dim()
    }

    pub fn demon_dim(&self) -> usize {
        self.pointer.dim()
    }

    pub fn labels(&self) -> Vec<String> {
        self.target.labels()
    }

    /// `1_S ⊗ P_D^x`
    pub fn demon_projector(&self, x: usize) -> Operator {
        tensor_product(&Operator::identity(self.system_dim()), self.pointer.projector(x))
            .expect("S⊗D dimension already validated")
    }

    /// Instrument induced on `S`: `K_{x,k} = (1⊗⟨d_k|) U_M (1⊗|ψ⟩)` for an
    /// orthonormal basis `{|d_k⟩}` of `range(P_D^x)`.
    pub fn instrument(&self) -> Instrument {
        let d_s = self.system_dim();
        let d_d = self.demon_dim();
        let u = self.premeasurement.matrix();
        let psi = self.demon_initial.vector();
        let mut kraus = Vec::new();
        for x in 0..self.pointer.len() {
            let mut ops = Vec::new();
            for dk in self.pointer.range_basis(x) {
                let k = DMatrix::from_fn(d_s, d_s, |i, j| {
                    let mut acc = c(0.0);
                    for a in 0..d_d {
                        if dk[a] == c(0.0) {
                            continue;
                        }
                        for b in 0..d_d {
                            acc += dk[a].conj() * u[(i * d_d + a, j * d_d + b)] * psi[b];
                        }
                    }
                    acc
                });
                ops.push(Operator::from_matrix(k).expect("Kraus entries are finite"));
            }
            kraus.push(ops);
        }
        Instrument { target: self.target.clone(), kraus }
    }
}

/// One labelled component of a proper mixture. `state` is `None` for
/// branches whose probability is at most `EPS_EIG`.
#[derive(Clone, Debug)]
pub struct Branch {
    pub index: usize,
    pub label: String,
    pub probability: f64,
    pub state: Option<DensityMatrix>,
}

/// A proper mixture of outcome-labelled states.
#[derive(Clone, Debug)]
pub struct Gemenge {
    branches: Vec<Branch>,
}

impl Gemenge {
    pub fn new(branches: Vec<Branch>) -> Result<Self> {
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Inconsistency(format!("branch probabilities sum to {total}")));
        }
        if let Some(b) = branches.iter().find(|b| b.probability < -EPS_ALG) {
            return Err(Error::Inconsistency(format!("negative probability for branch {}", b.label)));
        }
        Ok(Gemenge { branches })
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.probability).collect()
    }

    /// `Σ_x p_x ρ_x`
    pub fn mixture(&self) -> Result<DensityMatrix> {
        let dim = self
            .branches
            .iter()
            .find_map(|b| b.state.as_ref().map(|s| s.dim()))
            .ok_or_else(|| Error::arg("mixture has no populated branch"))?;
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for b in &self.branches {
            if let Some(s) = &b.state {
                m += s.matrix() * c(b.probability);
            }
        }
        DensityMatrix::from_matrix(m)
    }
}

fn project_branch(index: usize, label: &str, unnormalized: DMatrix<C64>) -> Branch {
    let p = unnormalized.trace().re;
    let state = (p > EPS_EIG).then(|| DensityMatrix::from_matrix(unnormalized / c(p)));
    Branch { index, label: label.to_string(), probability: p.max(0.0), state: state.and_then(|s| s.ok()) }
}

/// `U_M(ρ_S ⊗ |ψ⟩⟨ψ|)U_M†` on `S⊗D`, and its Lüders objectification by `Z_D`.
pub fn premeasure_and_objectify(model: &MeasurementModel, rho_s: &DensityMatrix) -> Result<(DensityMatrix, Gemenge)> {
    if rho_s.dim() != model.system_dim() {
        return Err(Error::arg(format!(
            "system state has dimension {}, model expects {}",
            rho_s.dim(),
            model.system_dim()
        )));
    }
    let joint = rho_s.tensor(&model.demon_initial.density())?;
    let premeasured = joint.evolve(&model.premeasurement)?;
    let mut branches = Vec::new();
    for x in 0..model.pointer.len() {
        let p = model.demon_projector(x);
        let proj = matmul(&matmul(p.matrix(), premeasured.matrix()), p.matrix());
        branches.push(project_branch(x, &model.target.outcomes()[x].label, proj));
    }
    Ok((premeasured, Gemenge::new(branches)?))
}

/// `Σ_x (1⊗P_D^x) ρ (1⊗P_D^x)`
pub fn objectify(model: &MeasurementModel, rho_sd: &DensityMatrix) -> Result<DensityMatrix> {
    if rho_sd.dim() != model.system_dim() * model.demon_dim() {
        return Err(Error::arg("state does not live on S⊗D"));
    }
    let mut m = DMatrix::<C64>::zeros(rho_sd.dim(), rho_sd.dim());
    for x in 0..model.pointer.len() {
        let p = model.demon_projector(x);
        m += matmul(&matmul(p.matrix(), rho_sd.matrix()), p.matrix());
    }
    DensityMatrix::from_matrix(m)
}

/// Reduced system and demon states of a branch on `S⊗D`.
pub fn branch_marginals(model: &MeasurementModel, rho_sd: &DensityMatrix) -> (DensityMatrix, DensityMatrix) {
    let dims = [model.system_dim(), model.demon_dim()];
    (
        DensityMatrix::from_matrix(partial_trace_dims(rho_sd.matrix(), &dims, &[0])).expect("partial trace of a state"),
        DensityMatrix::from_matrix(partial_trace_dims(rho_sd.matrix(), &dims, &[1])).expect("partial trace of a state"),
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyReport {
    pub pass: bool,
    /// `‖[U_M, H_S⊗1 + 1⊗H_D]‖`
    pub unitary_commutator: f64,
    /// `‖[Z_D, H_D]‖`
    pub pointer_commutator: f64,
}

pub fn check_energy_conserving_measurement(
    model: &MeasurementModel,
    h_s: &Operator,
    h_d: &Operator,
) -> Result<EnergyReport> {
    if h_s.dim() != model.system_dim() || h_d.dim() != model.demon_dim() {
        return Err(Error::arg("Hamiltonian dimensions do not match the model"));
    }
    let htot = tensor_product(h_s, &Operator::identity(model.demon_dim()))?
        .add(&tensor_product(&Operator::identity(model.system_dim()), h_d)?)?;
    let unitary_commutator = commutator_norm(&model.premeasurement, &htot)?;
    let pointer_commutator = commutator_norm(&model.pointer.operator(), h_d)?;
    Ok(EnergyReport {
        pass: unitary_commutator <= EPS_ALG && pointer_commutator <= EPS_ALG,
        unitary_commutator,
        pointer_commutator,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RepeatabilityReport {
    pub pass: bool,
    /// Non-degenerate: `|⟨φ̃_x|φ_x⟩|²`. Degenerate: `1 − max_α ‖(1−P^x)|φ̃_x^α⟩‖`.
    pub fidelities: Vec<f64>,
}

pub fn check_repeatable(model: &MeasurementModel) -> RepeatabilityReport {
    let target = &model.target;
    let fidelities: Vec<f64> = if target.is_nondegenerate() {
        (0..target.len()).map(|x| model.basis[x][0].fidelity(&model.post_states[x][0])).collect()
    } else {
        (0..target.len())
            .map(|x| 1.0 - model.post_states[x].iter().map(|v| target.leakage(x, v)).fold(0.0, f64::max))
            .collect()
    };
    RepeatabilityReport { pass: fidelities.iter().all(|&f| f >= 1.0 - FIDELITY_TOL), fidelities }
}

#[derive(Clone, Debug, Serialize)]
pub struct WayReport {
    pub energy_ok: bool,
    pub repeatable_or_pointer_commuting: bool,
    pub observable_commutes: bool,
    pub unitary_commutator: f64,
    pub pointer_commutator: f64,
    /// `‖[M_S, H_S]‖`
    pub observable_commutator: f64,
}

/// Checks that energy conservation together with repeatability (or a pointer
/// commuting with `H_D`) forces `[M_S, H_S] = 0`. A violation is reported
/// as an internal inconsistency.
pub fn way_witness(model: &MeasurementModel, h_s: &Operator, h_d: &Operator) -> Result<WayReport> {
    let energy = check_energy_conserving_measurement(model, h_s, h_d)?;
    let repeatable = check_repeatable(model).pass;
    let observable_commutator = commutator_norm(&model.target.operator(), h_s)?;
    let report = WayReport {
        energy_ok: energy.pass,
        repeatable_or_pointer_commuting: repeatable || energy.pointer_commutator <= EPS_ALG,
        observable_commutes: observable_commutator <= EPS_ALG,
        unitary_commutator: energy.unitary_commutator,
        pointer_commutator: energy.pointer_commutator,
        observable_commutator,
    };
    if report.energy_ok && report.repeatable_or_pointer_commuting && !report.observable_commutes {
        return Err(Error::Inconsistency(format!(
            "energy-conserving measurement with ‖[M_S,H_S]‖ = {observable_commutator}"
        )));
    }
    Ok(report)
}

/// Outcome-indexed Kraus families on `S`.
#[derive(Clone, Debug)]
pub struct Instrument {
    target: Observable,
    kraus: Vec<Vec<Operator>>,
}

impl Instrument {
    pub fn new(target: Observable, kraus: Vec<Vec<Operator>>) -> Result<Self> {
        if kraus.len() != target.len() {
            return Err(Error::arg("one Kraus family per outcome is required"));
        }
        let d = target.dim();
        let mut sum = DMatrix::<C64>::zeros(d, d);
        for k in kraus.iter().flatten() {
            if k.dim() != d {
                return Err(Error::arg("Kraus operator has the wrong dimension"));
            }
            sum += k.matrix().adjoint() * k.matrix();
        }
        let defect = Operator::from_matrix(sum - DMatrix::identity(d, d))?.operator_norm();
        if defect > EPS_ALG {
            return Err(Error::construction(format!("Kraus family incomplete (defect {defect})")));
        }
        Ok(Instrument { target, kraus })
    }

    pub fn target(&self) -> &Observable {
        &self.target
    }

    pub fn kraus(&self, x: usize) -> &[Operator] {
        &self.kraus[x]
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    /// Largest `‖(1 − P^x) K_{x,k}‖`; zero iff every output lies in its
    /// outcome subspace.
    pub fn support_leakage(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for (x, family) in self.kraus.iter().enumerate() {
            let q = Operator::identity(d).sub(self.target.projector(x)).expect("same dim");
            for k in family {
                worst = worst.max(q.mul(k).expect("same dim").operator_norm());
            }
        }
        worst
    }

    pub fn is_repeatable(&self) -> bool {
        self.support_leakage() <= FIDELITY_TOL
    }
}

#[derive(Clone, Debug)]
pub enum DegenerateData {
    /// One unitary `V_x` per outcome; `K_x = V_x P^x`.
    StrongValueCorrelation { unitaries: Vec<Operator> },
    /// Per outcome, pairs `(|φ_x^α⟩, |φ̃_x^α⟩)`; `K_{x,α} = |φ̃_x^α⟩⟨φ_x^α|`.
    CoarseGrained { pairs: Vec<Vec<(PureState, PureState)>> },
}

pub fn build_degenerate_instrument(
    target: &Observable,
    data: &DegenerateData,
    require_repeatable: bool,
) -> Result<Instrument> {
    let kraus: Vec<Vec<Operator>> = match data {
        DegenerateData::StrongValueCorrelation { unitaries } => {
            if unitaries.len() != target.len() {
                return Err(Error::arg("one unitary per outcome is required"));
            }
            unitaries.iter().enumerate().map(|(x, v)| Ok(vec![v.mul(target.projector(x))?])).collect::<Result<_>>()?
        }
        DegenerateData::CoarseGrained { pairs } => {
            if pairs.len() != target.len() {
                return Err(Error::arg("one vector family per outcome is required"));
            }
            pairs
                .iter()
                .map(|family| family.iter().map(|(phi, post)| Operator::outer(post, phi)).collect())
                .collect::<Result<_>>()?
        }
    };
    let instr = Instrument::new(target.clone(), kraus)?;
    if require_repeatable && !instr.is_repeatable() {
        return Err(Error::construction(format!(
            "post-measurement vectors leave their outcome subspaces (leakage {})",
            instr.support_leakage()
        )));
    }
    Ok(instr)
}

/// Branch `x`: `Σ_k K_{x,k} ρ K_{x,k}†`, renormalized.
pub fn apply_instrument(instr: &Instrument, rho_s: &DensityMatrix) -> Result<Gemenge> {
    if rho_s.dim() != instr.dim() {
        return Err(Error::arg("state dimension does not match instrument"));
    }
    let d = instr.dim();
    let branches = instr
        .kraus
        .iter()
        .enumerate()
        .map(|(x, family)| {
            let mut m = DMatrix::<C64>::zeros(d, d);
            for k in family {
                m += k.matrix() * rho_s.matrix() * k.matrix().adjoint();
            }
            project_branch(x, &instr.target.outcomes()[x].label, m)
        })
        .collect();
    Gemenge::new(branches)
}
