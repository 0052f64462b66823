//! Named engine constructions.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{check_global_dim, EngineConfig, EngineFlags, MeasurementStage, Tolerances, WeightSpec};
use crate::error::{Error, Result};
use crate::feedback::{
    build_oscillator_weight, build_shift_unitaries, compose_feedback_unitary, transition_unitary, OscillatorWeight,
    WEIGHT_HEADROOM,
};
use crate::measurement::{build_premeasurement, build_standard_premeasurement, Observable, PremeasurementData};
use crate::qop::{c, thermal_state, DensityMatrix, Operator, PureState, C64};
use crate::thermo::{two_band_erasure, ErasureMode, ThermoContext};

pub const SCENARIO_NAMES: [&str; 5] =
    ["example_I", "example_II", "degenerate_circumvention", "reservoir_circumvention", "null_engine"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErasureChoice {
    #[default]
    LandauerOptimal,
    /// Two-band 8-level reservoir with gap `16 K_B T`; qubit demons only.
    Explicit,
}

impl ErasureChoice {
    pub fn mode(self, demon_dim: usize, ctx: &ThermoContext) -> Result<ErasureMode> {
        match self {
            ErasureChoice::LandauerOptimal => Ok(ErasureMode::LandauerOptimal),
            ErasureChoice::Explicit if demon_dim == 2 => {
                Ok(ErasureMode::Explicit(two_band_erasure(4, 16.0 * ctx.kt())?))
            }
            ErasureChoice::Explicit => Err(field_error("erasure", "explicit erasure needs a qubit demon")),
        }
    }
}

/// Scenario parameters; unused fields are ignored by a given scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    /// Population of the excited system level.
    pub q: f64,
    /// Width of the weight superposition.
    #[serde(rename = "N", alias = "n")]
    pub n: usize,
    pub omega: f64,
    pub temperature: f64,
    pub k_b: f64,
    /// System dimension of the degenerate and reservoir scenarios.
    pub d: usize,
    pub ranks: Vec<usize>,
    pub dim_r: usize,
    /// Partial-swap strength in `[0, 1]`; 1 is a full swap.
    pub coupling: f64,
    pub tol_s: Option<f64>,
    pub erasure: ErasureChoice,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            q: 0.5,
            n: 20,
            omega: 1.0,
            temperature: 1.0,
            k_b: 1.0,
            d: 4,
            ranks: vec![2, 2],
            dim_r: 16,
            coupling: 1.0,
            tol_s: None,
            erasure: ErasureChoice::LandauerOptimal,
        }
    }
}

fn field_error(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Argument(format!("{field}: {msg}"))
}

impl ScenarioParams {
    /// Checks the ranges shared by every scenario.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q) {
            return Err(field_error("q", format!("must lie in [0, 1], got {}", self.q)));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(field_error("omega", format!("must be positive, got {}", self.omega)));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(field_error("temperature", format!("must be positive, got {}", self.temperature)));
        }
        if !(self.k_b.is_finite() && self.k_b > 0.0) {
            return Err(field_error("k_b", format!("must be positive, got {}", self.k_b)));
        }
        if !(0.0..=1.0).contains(&self.coupling) {
            return Err(field_error("coupling", format!("must lie in [0, 1], got {}", self.coupling)));
        }
        if let Some(t) = self.tol_s {
            if !(t.is_finite() && t >= 0.0) {
                return Err(field_error("tol_s", format!("must be non-negative, got {t}")));
            }
        }
        if self.n < 2 {
            return Err(field_error("N", format!("must be at least 2, got {}", self.n)));
        }
        Ok(())
    }

    fn thermo(&self) -> Result<ThermoContext> {
        ThermoContext::new(self.temperature, self.k_b)
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances { entropy: self.tol_s, work_scale: self.omega, ..Tolerances::default() }
    }
}

/// Builds the named configuration.
pub fn scenario_library(name: &str, params: &ScenarioParams) -> Result<EngineConfig> {
    params.validate()?;
    match name {
        "example_I" => qubit_example(name, params, false),
        "example_II" => qubit_example(name, params, true),
        "degenerate_circumvention" => degenerate_circumvention(params),
        "reservoir_circumvention" => reservoir_circumvention(params),
        "null_engine" => null_engine(params),
        other => Err(Error::Argument(format!(
            "scenario: unknown name {other:?}; expected one of {}",
            SCENARIO_NAMES.join(", ")
        ))),
    }
}

fn qubit_h(omega: f64) -> Operator {
    Operator::from_diagonal(&[omega / 2.0, -omega / 2.0])
}

fn qubit_state(q: f64) -> Result<DensityMatrix> {
    DensityMatrix::from_diagonal(&[q, 1.0 - q])
}

fn weight(params: &ScenarioParams, shift: usize) -> Result<OscillatorWeight> {
    build_oscillator_weight(params.omega, params.n, params.n + 2 + shift.max(WEIGHT_HEADROOM))
}

/// Qubit system and demon; eigenstate posts (I) or `(φ_+ ± φ_−)/√2` (II).
fn qubit_example(name: &str, params: &ScenarioParams, superposed: bool) -> Result<EngineConfig> {
    let omega = params.omega;
    let plus = PureState::basis(2, 0);
    let minus = PureState::basis(2, 1);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let (posts, h_d, psi) = if superposed {
        (
            [PureState::from_real(&[r, r])?, PureState::from_real(&[r, -r])?],
            Operator::from_diagonal(&[omega / 2.0, -omega / 2.0]),
            PureState::from_real(&[r, r])?,
        )
    } else {
        ([plus.clone(), minus.clone()], Operator::zeros(2), plus.clone())
    };
    let h_s = qubit_h(omega);
    let target = Observable::from_basis(&["+", "-"], &[1.0, -1.0], &[plus.clone(), minus.clone()])?;
    let pointer = target.clone();
    let model = build_standard_premeasurement(
        &target,
        &posts,
        &pointer,
        &[plus.clone(), minus.clone()],
        &psi,
        &h_d,
        Some(&h_s),
    )?;
    let w = weight(params, 1)?;
    let (up, um) = build_shift_unitaries(&plus, &minus, &posts[0], &posts[1], &w)?;
    check_global_dim(&[w.dim(), 2, 2])?;
    let feedback = compose_feedback_unitary(
        vec![up, um],
        vec![pointer.projector(0).clone(), pointer.projector(1).clone()],
        &[w.dim(), 2],
    )?;
    let ctx = params.thermo()?;
    EngineConfig::new(
        name,
        h_s,
        qubit_state(params.q)?,
        MeasurementStage::Model(model),
        feedback,
        WeightSpec::Oscillator(w),
        ctx,
        params.erasure.mode(2, &ctx)?,
        None,
        EngineFlags::default(),
        params.tolerances(),
    )
}

fn outcome_labels(k: usize) -> Vec<String> {
    if k == 2 {
        vec!["y".into(), "z".into()]
    } else {
        (0..k).map(|i| format!("x{i}")).collect()
    }
}

/// Levels of `H_S = diag(0, ω, …, (d−1)ω)` dealt round-robin to outcomes.
fn deal_levels(ranks: &[usize]) -> Vec<Vec<usize>> {
    let d: usize = ranks.iter().sum();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); ranks.len()];
    let mut x = 0;
    for level in 0..d {
        while groups[x].len() == ranks[x] {
            x = (x + 1) % ranks.len();
        }
        groups[x].push(level);
        x = (x + 1) % ranks.len();
    }
    groups
}

/// Coarse-grained repeatable measurement of a degenerate observable whose
/// post vector is the highest level in each outcome subspace. The demon
/// records level `l` of outcome `x` in a state of energy `(l − h_x)ω`.
fn degenerate_circumvention(params: &ScenarioParams) -> Result<EngineConfig> {
    let d = params.d;
    if d < 3 {
        return Err(field_error("d", format!("must be at least 3, got {d}")));
    }
    let ranks = &params.ranks;
    if ranks.len() < 2 || ranks.contains(&0) || ranks.iter().sum::<usize>() != d {
        return Err(field_error("ranks", format!("need at least two positive ranks summing to d = {d}")));
    }
    if ranks.len() == d {
        return Err(field_error("ranks", "at least one outcome must be degenerate"));
    }
    if ranks[0] < 2 {
        return Err(field_error("ranks", "the outcome holding the ground state needs rank at least 2"));
    }
    let omega = params.omega;
    let groups = deal_levels(ranks);
    let tops: Vec<usize> = groups.iter().map(|g| *g.iter().max().expect("non-empty")).collect();
    let labels = outcome_labels(ranks.len());
    let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let values: Vec<f64> = (0..ranks.len()).map(|x| x as f64).collect();

    let h_s = Operator::from_diagonal(&(0..d).map(|l| omega * l as f64).collect::<Vec<_>>());
    let sys = |l: usize| PureState::basis(d, l);
    let target = Observable::from_subspaces(
        &label_refs,
        &values,
        &groups.iter().map(|g| g.iter().map(|&l| sys(l)).collect()).collect::<Vec<_>>(),
    )?;

    // Demon slots: outcome blocks in order, the top level of each block first.
    let mut demon_energy = Vec::with_capacity(d);
    let mut records = Vec::with_capacity(ranks.len());
    let mut spans = Vec::with_capacity(ranks.len());
    let mut basis = Vec::with_capacity(ranks.len());
    let mut posts = Vec::with_capacity(ranks.len());
    for (x, g) in groups.iter().enumerate() {
        let mut ordered = g.clone();
        ordered.sort_by_key(|&l| (l != tops[x], l));
        let mut recs = Vec::new();
        for &l in &ordered {
            recs.push(demon_energy.len());
            demon_energy.push(omega * (l as f64 - tops[x] as f64));
        }
        basis.push(ordered.iter().map(|&l| sys(l)).collect::<Vec<_>>());
        posts.push(vec![sys(tops[x]); ordered.len()]);
        records.push(recs.iter().map(|&i| PureState::basis(d, i)).collect::<Vec<_>>());
        spans.push(recs.iter().map(|&i| PureState::basis(d, i)).collect::<Vec<_>>());
    }
    let pointer = Observable::from_subspaces(&label_refs, &values, &spans)?;
    let h_d = Operator::from_diagonal(&demon_energy);
    let model = build_premeasurement(
        PremeasurementData {
            target,
            basis,
            post_states: posts,
            records,
            pointer: pointer.clone(),
            demon_initial: PureState::basis(d, 0),
            demon_hamiltonian: h_d,
        },
        Some(&h_s),
    )?;

    let k_max = *tops.iter().max().expect("non-empty");
    let w = weight(params, k_max)?;
    check_global_dim(&[w.dim(), d, d])?;
    let unitaries =
        tops.iter()
            .map(|&top| {
                if top == 0 {
                    Ok(Operator::identity(w.dim() * d))
                } else {
                    transition_unitary(w.dim(), d, top, 0, top)
                }
            })
            .collect::<Result<Vec<_>>>()?;
    let projectors = (0..ranks.len()).map(|x| pointer.projector(x).clone()).collect();
    let feedback = compose_feedback_unitary(unitaries, projectors, &[w.dim(), d])?;
    let ctx = params.thermo()?;
    let rho_s = thermal_state(&h_s, ctx.beta())?;
    EngineConfig::new(
        "degenerate_circumvention",
        h_s,
        rho_s,
        MeasurementStage::Model(model),
        feedback,
        WeightSpec::Oscillator(w),
        ctx,
        params.erasure.mode(d, &ctx)?,
        None,
        EngineFlags::default(),
        params.tolerances(),
    )
}

/// Reservoir of `log2(dim_r)` non-interacting qubits; qubit `k` (most
/// significant bit first) has gap `(K − k)ω`.
pub fn qubit_ladder_reservoir(dim_r: usize, omega: f64) -> Result<Operator> {
    let k = ladder_size(dim_r)?;
    let levels: Vec<f64> = (0..dim_r)
        .map(|r| (0..k).filter(|&j| r >> (k - 1 - j) & 1 == 1).map(|j| omega * (k - j) as f64).sum())
        .collect();
    Ok(Operator::from_diagonal(&levels))
}

fn ladder_size(dim_r: usize) -> Result<usize> {
    if dim_r < 2 || !dim_r.is_power_of_two() {
        return Err(field_error("dim_r", format!("must be a power of two at least 2, got {dim_r}")));
    }
    Ok(dim_r.trailing_zeros() as usize)
}

/// Partial swap `|x⟩_S|1⟩_j|n⟩_W ↔ |1−x⟩_S|0⟩_j|n+m⟩_W` with reservoir qubit
/// `j` of gap `mω`, on `W⊗S⊗R`.
fn ladder_step(dim_w: usize, dim_r: usize, x: usize, j: usize, m: usize, theta: f64) -> Result<Operator> {
    let k = dim_r.trailing_zeros() as usize;
    let bit = 1 << (k - 1 - j);
    let n = dim_w * 2 * dim_r;
    let idx = |w: usize, s: usize, r: usize| (w * 2 + s) * dim_r + r;
    let (cs, sn) = (theta.cos(), theta.sin());
    let mut u = DMatrix::<C64>::identity(n, n);
    for level in 0..dim_w.saturating_sub(m) {
        for r in (0..dim_r).filter(|r| r & bit != 0) {
            let a = idx(level, x, r);
            let b = idx(level + m, 1 - x, r & !bit);
            u[(a, a)] = c(cs);
            u[(b, b)] = c(cs);
            u[(b, a)] = c(sn);
            u[(a, b)] = c(-sn);
        }
    }
    Operator::from_matrix(u)
}

/// Fully degenerate qubit measured repeatably; feedback lets the system
/// spread over both levels by drawing energy from a ladder of reservoir
/// qubits, largest gap first.
fn reservoir_circumvention(params: &ScenarioParams) -> Result<EngineConfig> {
    let dim_r = params.dim_r;
    let k = ladder_size(dim_r)?;
    let omega = params.omega;
    let h_s = Operator::zeros(2);
    let zero = PureState::basis(2, 0);
    let one = PureState::basis(2, 1);
    let target = Observable::from_basis(&["0", "1"], &[0.0, 1.0], &[zero.clone(), one.clone()])?;
    let pointer = target.clone();
    let model = build_standard_premeasurement(
        &target,
        &[zero.clone(), one.clone()],
        &pointer,
        &[zero.clone(), one.clone()],
        &zero,
        &Operator::zeros(2),
        Some(&h_s),
    )?;
    let total_shift = k * (k + 1) / 2;
    let w = weight(params, total_shift)?;
    check_global_dim(&[w.dim(), 2, 2, dim_r])?;
    let theta = params.coupling * FRAC_PI_2;
    let unitaries = (0..2)
        .map(|x| {
            let mut u = Operator::identity(w.dim() * 2 * dim_r);
            for j in 0..k {
                u = ladder_step(w.dim(), dim_r, x, j, k - j, theta)?.mul(&u)?;
            }
            Ok(u)
        })
        .collect::<Result<Vec<_>>>()?;
    let feedback = compose_feedback_unitary(
        unitaries,
        vec![pointer.projector(0).clone(), pointer.projector(1).clone()],
        &[w.dim(), 2, dim_r],
    )?;
    let ctx = params.thermo()?;
    EngineConfig::new(
        "reservoir_circumvention",
        h_s,
        qubit_state(params.q)?,
        MeasurementStage::Model(model),
        feedback,
        WeightSpec::Oscillator(w),
        ctx,
        params.erasure.mode(2, &ctx)?,
        Some(qubit_ladder_reservoir(dim_r, omega)?),
        EngineFlags::default(),
        params.tolerances(),
    )
}

/// Trivial single-outcome measurement with a one-level demon and identity feedback.
fn null_engine(params: &ScenarioParams) -> Result<EngineConfig> {
    let h_s = qubit_h(params.omega);
    let zero = PureState::basis(2, 0);
    let one = PureState::basis(2, 1);
    let target = Observable::from_subspaces(&["1"], &[1.0], &[vec![zero.clone(), one.clone()]])?;
    let demon = PureState::basis(1, 0);
    let pointer = Observable::from_subspaces(&["1"], &[1.0], &[vec![demon.clone()]])?;
    let model = build_premeasurement(
        PremeasurementData {
            target,
            basis: vec![vec![zero.clone(), one.clone()]],
            post_states: vec![vec![zero, one]],
            records: vec![vec![demon.clone(), demon.clone()]],
            pointer: pointer.clone(),
            demon_initial: demon,
            demon_hamiltonian: Operator::zeros(1),
        },
        Some(&h_s),
    )?;
    let w = weight(params, 0)?;
    let feedback = compose_feedback_unitary(
        vec![Operator::identity(w.dim() * 2)],
        vec![pointer.projector(0).clone()],
        &[w.dim(), 2],
    )?;
    let ctx = params.thermo()?;
    EngineConfig::new(
        "null_engine",
        h_s,
        qubit_state(params.q)?,
        MeasurementStage::Model(model),
        feedback,
        WeightSpec::Oscillator(w),
        ctx,
        params.erasure.mode(1, &ctx)?,
        None,
        EngineFlags::default(),
        params.tolerances(),
    )
}
