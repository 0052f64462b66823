//! Seeded random conforming engines and the three-feature exclusion scan.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_features, run_cycle, EngineConfig, EngineFlags, MeasurementStage, Tolerances, WeightSpec};
use crate::error::{Error, Result};
use crate::feedback::{build_oscillator_weight, compose_feedback_unitary, transition_unitary, WEIGHT_HEADROOM};
use crate::measurement::{build_standard_premeasurement, check_repeatable, MeasurementModel, Observable};
use crate::qop::{complete_unitary, energy_blocks, tensor_product, DensityMatrix, Operator, PureState, EPS_ALG};
use crate::random::{haar_unitary_matrix, instance_rng, random_block_unitary, random_density};
use crate::thermo::{ErasureMode, ThermoContext};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanFamily {
    /// Eigenstate posts, pure weight, downward transitions or random
    /// energy-block feedback.
    Repeatable,
    /// Eigenstate posts and a two-level mixed weight that the ground outcome
    /// purifies.
    Purifying,
    /// Superposed posts in a degenerate level, lowered to the ground state.
    Cooling,
    /// Cycles through the other three by instance index.
    Mixed,
}

impl ScanFamily {
    /// The concrete family used for instance `index` (`Mixed` cycles through the three).
    pub fn resolve(self, index: usize) -> ScanFamily {
        match self {
            ScanFamily::Mixed => [ScanFamily::Repeatable, ScanFamily::Purifying, ScanFamily::Cooling][index % 3],
            f => f,
        }
    }
}

impl fmt::Display for ScanFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScanFamily::Repeatable => "repeatable",
            ScanFamily::Purifying => "purifying",
            ScanFamily::Cooling => "cooling",
            ScanFamily::Mixed => "mixed",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ScanFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "repeatable" => Ok(ScanFamily::Repeatable),
            "purifying" => Ok(ScanFamily::Purifying),
            "cooling" => Ok(ScanFamily::Cooling),
            "mixed" => Ok(ScanFamily::Mixed),
            other => Err(Error::Argument(format!("family: unknown value {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRecord {
    pub index: usize,
    pub family: ScanFamily,
    pub triple: Option<(bool, bool, bool)>,
    pub probabilities: Vec<f64>,
    pub works: Vec<f64>,
    pub min_work: f64,
    /// Work of the outcome whose post state has the lowest energy.
    pub ground_outcome_work: f64,
    pub repeatable: bool,
    /// `‖[M_S, H_S]‖`
    pub observable_commutator: f64,
    pub order_defect: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanReport {
    pub family: ScanFamily,
    pub count: usize,
    pub seed: u64,
    pub all_three: usize,
    /// Instances with exactly two features, indexed by the missing one
    /// (F1, F2, F3).
    pub pattern_counts: [usize; 3],
    pub errors: usize,
    pub records: Vec<ScanRecord>,
}

impl ScanReport {
    pub fn exclusion_holds(&self) -> bool {
        self.all_three == 0 && self.errors == 0
    }

    pub fn all_patterns_witnessed(&self) -> bool {
        self.pattern_counts.iter().all(|&n| n > 0)
    }
}

/// Runs `count` seeded instances of `family` in parallel; records are kept in
/// instance order.
pub fn impossibility_scan(family: ScanFamily, count: usize, seed: u64) -> ScanReport {
    let records: Vec<ScanRecord> =
        (0..count).into_par_iter().map(|index| scan_instance(family.resolve(index), index, seed)).collect();
    let mut all_three = 0;
    let mut pattern_counts = [0; 3];
    let mut errors = 0;
    for r in &records {
        match r.triple {
            Some((true, true, true)) => all_three += 1,
            Some((f1, f2, f3)) if [f1, f2, f3].iter().filter(|&&b| b).count() == 2 => {
                let missing = [f1, f2, f3].iter().position(|&b| !b).expect("one feature is false");
                pattern_counts[missing] += 1;
            }
            _ => {}
        }
        if r.error.is_some() {
            errors += 1;
        }
    }
    ScanReport { family, count, seed, all_three, pattern_counts, errors, records }
}

fn scan_instance(family: ScanFamily, index: usize, seed: u64) -> ScanRecord {
    let mut rng = instance_rng(seed, index as u64);
    let mut record = ScanRecord {
        index,
        family,
        triple: None,
        probabilities: Vec::new(),
        works: Vec::new(),
        min_work: f64::NAN,
        ground_outcome_work: f64::NAN,
        repeatable: false,
        observable_commutator: f64::NAN,
        order_defect: None,
        error: None,
    };
    let outcome = random_config(family, &mut rng).and_then(|(config, ground)| {
        if let MeasurementStage::Model(m) = &config.measurement {
            record.repeatable = check_repeatable(m).pass;
        }
        record.observable_commutator = config.certification().observable_commutator;
        let result = run_cycle(&config)?;
        record.probabilities = result.probabilities();
        record.works = result.works();
        record.ground_outcome_work = record.works[ground];
        record.order_defect = result.order_defect;
        let features = evaluate_features(&result, &config)?;
        record.min_work = features.min_work;
        record.triple = Some(features.triple());
        Ok(())
    });
    if let Err(e) = outcome {
        record.error = Some(e.to_string());
    }
    record
}

/// A conforming configuration of the given family and the index of the
/// outcome whose post state has the lowest energy.
pub fn random_config<R: Rng + ?Sized>(family: ScanFamily, rng: &mut R) -> Result<(EngineConfig, usize)> {
    match family {
        ScanFamily::Repeatable => repeatable_config(rng),
        ScanFamily::Purifying => purifying_config(rng),
        ScanFamily::Cooling => cooling_config(rng),
        ScanFamily::Mixed => random_config(ScanFamily::Repeatable, rng),
    }
}

const OMEGA: f64 = 1.0;

fn basis_observable(d: usize, basis: &[PureState]) -> Result<Observable> {
    let labels: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let values: Vec<f64> = (0..d).map(|i| i as f64).collect();
    Observable::from_basis(&refs, &values, basis)
}

/// Register demon `|0⟩ ↦ |x⟩` with `H_D = 0` for eigenstate posts.
fn register_model(h_s: &Operator) -> Result<MeasurementModel> {
    let d = h_s.dim();
    let basis: Vec<PureState> = (0..d).map(|i| PureState::basis(d, i)).collect();
    let target = basis_observable(d, &basis)?;
    build_standard_premeasurement(&target, &basis, &target, &basis, &basis[0], &Operator::zeros(d), Some(h_s))
}

/// Sorted distinct integer levels starting at 0.
fn integer_levels<R: Rng + ?Sized>(d: usize, max: usize, rng: &mut R) -> Vec<usize> {
    let mut levels = vec![0];
    while levels.len() < d {
        let k = rng.random_range(1..=max);
        if !levels.contains(&k) {
            levels.push(k);
        }
    }
    levels.sort_unstable();
    levels
}

fn random_temperature<R: Rng + ?Sized>(rng: &mut R) -> Result<ThermoContext> {
    ThermoContext::new(rng.random_range(1.0..2.0), 1.0)
}

fn finish(
    name: &str,
    h_s: Operator,
    rho_s: DensityMatrix,
    model: MeasurementModel,
    unitaries: Vec<Operator>,
    weight: WeightSpec,
    thermo: ThermoContext,
) -> Result<EngineConfig> {
    let d = h_s.dim();
    let projectors = (0..model.target().len()).map(|x| model.pointer().projector(x).clone()).collect();
    let feedback = compose_feedback_unitary(unitaries, projectors, &[weight.dim(), d])?;
    EngineConfig::new(
        name,
        h_s,
        rho_s,
        MeasurementStage::Model(model),
        feedback,
        weight,
        thermo,
        ErasureMode::LandauerOptimal,
        None,
        EngineFlags::default(),
        Tolerances { work_scale: OMEGA, ..Tolerances::default() },
    )
}

fn repeatable_config<R: Rng + ?Sized>(rng: &mut R) -> Result<(EngineConfig, usize)> {
    let d = rng.random_range(2..=3);
    let levels = integer_levels(d, 4, rng);
    let h_s = Operator::from_diagonal(&levels.iter().map(|&k| OMEGA * k as f64).collect::<Vec<_>>());
    let model = register_model(&h_s)?;
    let n = rng.random_range(2..=6);
    let k_max = *levels.last().expect("non-empty");
    let weight = build_oscillator_weight(OMEGA, n, n + 2 + k_max.max(WEIGHT_HEADROOM))?;
    let dim_w = weight.dim();
    let random_blocks = rng.random_bool(0.25);
    let h_ws = tensor_product(&weight.hamiltonian()?, &Operator::identity(d))?
        .add(&tensor_product(&Operator::identity(dim_w), &h_s)?)?;
    let blocks = energy_blocks(&h_ws, EPS_ALG)?;
    let unitaries = (0..d)
        .map(|x| {
            if random_blocks {
                return Ok(random_block_unitary(dim_w * d, &blocks, rng));
            }
            let to = rng.random_range(0..=x);
            if to == x {
                Ok(Operator::identity(dim_w * d))
            } else {
                transition_unitary(dim_w, d, x, to, levels[x] - levels[to])
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let rho_s = random_density(d, rng);
    let thermo = random_temperature(rng)?;
    Ok((finish("repeatable", h_s, rho_s, model, unitaries, WeightSpec::Oscillator(weight), thermo)?, 0))
}

fn purifying_config<R: Rng + ?Sized>(rng: &mut R) -> Result<(EngineConfig, usize)> {
    let d = rng.random_range(2..=3);
    let mut levels = vec![0, 1];
    if d == 3 {
        levels.push(rng.random_range(2..=3));
    }
    let h_s = Operator::from_diagonal(&levels.iter().map(|&k| OMEGA * k as f64).collect::<Vec<_>>());
    let model = register_model(&h_s)?;
    let k_max = *levels.last().expect("non-empty");
    let n = rng.random_range(0..=3);
    let dim_w = n + 2 + k_max + WEIGHT_HEADROOM;
    let p: f64 = rng.random_range(0.4..0.6);
    let mut pops = vec![0.0; dim_w];
    pops[n] = p;
    pops[n + 1] = 1.0 - p;
    let weight = WeightSpec::Generic {
        hamiltonian: Operator::from_diagonal(&(0..dim_w).map(|l| OMEGA * l as f64).collect::<Vec<_>>()),
        state: DensityMatrix::from_diagonal(&pops)?,
    };
    // Ground outcome: |n+1⟩|0⟩ ↔ |n⟩|1⟩ leaves the weight in |n⟩.
    let mut perm: Vec<usize> = (0..dim_w * d).collect();
    let (a, b) = ((n + 1) * d, n * d + 1);
    perm.swap(a, b);
    let mut unitaries = vec![permutation(&perm)?];
    for (x, &level) in levels.iter().enumerate().skip(1) {
        unitaries.push(transition_unitary(dim_w, d, x, 0, level)?);
    }
    let rho_s = random_density(d, rng);
    let thermo = random_temperature(rng)?;
    Ok((finish("purifying", h_s, rho_s, model, unitaries, weight, thermo)?, 0))
}

fn permutation(perm: &[usize]) -> Result<Operator> {
    let n = perm.len();
    let mut m = nalgebra::DMatrix::zeros(n, n);
    for (from, &to) in perm.iter().enumerate() {
        m[(to, from)] = crate::qop::c(1.0);
    }
    Operator::from_matrix(m)
}

/// `H_S = diag(0, mω, mω)` measured in a random eigenbasis; every outcome
/// leaves the system in a random vector of the excited pair, and feedback
/// lowers it to the ground state while lifting the weight by `m`.
fn cooling_config<R: Rng + ?Sized>(rng: &mut R) -> Result<(EngineConfig, usize)> {
    let m = rng.random_range(1..=2);
    let gap = OMEGA * m as f64;
    let h_s = Operator::from_diagonal(&[0.0, gap, gap]);
    let u = haar_unitary_matrix(2, rng);
    let excited = |a: crate::qop::C64, b: crate::qop::C64| PureState::from_amplitudes(&[crate::qop::c(0.0), a, b]);
    let basis = vec![PureState::basis(3, 0), excited(u[(0, 0)], u[(1, 0)])?, excited(u[(0, 1)], u[(1, 1)])?];
    let target = basis_observable(3, &basis)?;
    let posts: Vec<PureState> = (0..3)
        .map(|_| {
            let v = haar_unitary_matrix(2, rng);
            excited(v[(0, 0)], v[(1, 0)])
        })
        .collect::<Result<_>>()?;
    let records: Vec<PureState> = (0..3).map(|i| PureState::basis(3, i)).collect();
    let pointer = basis_observable(3, &records)?;
    let h_d = Operator::from_diagonal(&[0.0, gap, gap]);
    let model = build_standard_premeasurement(&target, &posts, &pointer, &records, &records[1], &h_d, Some(&h_s))?;

    let n = rng.random_range(2..=6);
    let weight = build_oscillator_weight(OMEGA, n, n + 2 + m.max(WEIGHT_HEADROOM))?;
    let dim_w = weight.dim();
    let h_ws = tensor_product(&weight.hamiltonian()?, &Operator::identity(3))?
        .add(&tensor_product(&Operator::identity(dim_w), &h_s)?)?;
    let blocks = energy_blocks(&h_ws, EPS_ALG)?;
    let ground = PureState::basis(3, 0);
    let unitaries = posts
        .iter()
        .map(|post| {
            let (inputs, outputs): (Vec<_>, Vec<_>) = (0..dim_w - m)
                .map(|l| {
                    let i = PureState::basis(dim_w, l).tensor(post)?.vector().clone();
                    let o = PureState::basis(dim_w, l + m).tensor(&ground)?.vector().clone();
                    Ok((i, o))
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .unzip();
            complete_unitary(dim_w * 3, &inputs, &outputs, &blocks)
        })
        .collect::<Result<Vec<_>>>()?;
    let rho_s = random_density(3, rng);
    let thermo = random_temperature(rng)?;
    let config = finish("cooling", h_s, rho_s, model, unitaries, WeightSpec::Oscillator(weight), thermo)?;
    Ok((config, 0))
}
