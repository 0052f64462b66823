//! Fully explicit engine configurations with matrices written as nested
//! `[re, im]` pairs.

use serde::Deserialize;
use szilard_core::engine::{EngineConfig, EngineFlags, ErasureChoice, MeasurementStage, Tolerances, WeightSpec};
use szilard_core::feedback::compose_feedback_unitary;
use szilard_core::measurement::{build_standard_premeasurement, Observable};
use szilard_core::qop::{DensityMatrix, Operator, PureState, C64};
use szilard_core::thermo::ThermoContext;

pub type Pair = [f64; 2];
pub type PairVector = Vec<Pair>;
pub type PairMatrix = Vec<Vec<Pair>>;

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSpec {
    pub h_s: PairMatrix,
    pub rho_s: PairMatrix,
    /// Eigenbasis of the measured observable.
    pub basis: Vec<PairVector>,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    pub posts: Vec<PairVector>,
    /// Orthonormal demon basis; record `x` is the pointer state of outcome `x`.
    pub records: Vec<PairVector>,
    pub demon_hamiltonian: PairMatrix,
    pub demon_initial: PairVector,
    /// One unitary on `W⊗S` per outcome.
    pub feedback: Vec<PairMatrix>,
    pub weight_hamiltonian: PairMatrix,
    pub weight_state: PairMatrix,
    #[serde(default = "one")]
    pub temperature: f64,
    #[serde(default = "one")]
    pub k_b: f64,
    #[serde(default)]
    pub erasure: ErasureChoice,
    #[serde(default)]
    pub tol_s: Option<f64>,
}

/// A build failure attributed to one field.
#[derive(Debug)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

fn at(field: &str) -> impl Fn(szilard_core::Error) -> FieldError + '_ {
    move |e| FieldError { field: field.to_string(), message: e.to_string() }
}

fn to_c(p: &Pair) -> C64 {
    C64::new(p[0], p[1])
}

fn operator(field: &str, m: &PairMatrix) -> Result<Operator, FieldError> {
    let rows: Vec<Vec<C64>> = m.iter().map(|r| r.iter().map(to_c).collect()).collect();
    Operator::from_complex_rows(&rows).map_err(at(field))
}

fn state(field: &str, v: &PairVector) -> Result<PureState, FieldError> {
    let amps: Vec<C64> = v.iter().map(to_c).collect();
    PureState::from_amplitudes(&amps).map_err(at(field))
}

fn states(field: &str, vs: &[PairVector]) -> Result<Vec<PureState>, FieldError> {
    vs.iter().map(|v| state(field, v)).collect()
}

impl ExplicitSpec {
    /// Builds and certifies the configuration. With `non_conforming` the
    /// premeasurement is completed without energy blocks and certification
    /// failures are recorded instead of rejected.
    pub fn build(&self, name: &str, non_conforming: bool) -> Result<EngineConfig, FieldError> {
        let h_s = operator("h_s", &self.h_s)?;
        let rho_s = DensityMatrix::new(operator("rho_s", &self.rho_s)?).map_err(at("rho_s"))?;
        let basis = states("basis", &self.basis)?;
        let n = basis.len();
        let labels: Vec<String> = match &self.labels {
            Some(l) => l.clone(),
            None => (0..n).map(|i| i.to_string()).collect(),
        };
        let values: Vec<f64> = match &self.values {
            Some(v) => v.clone(),
            None => (0..n).map(|i| i as f64).collect(),
        };
        if labels.len() != n {
            return Err(FieldError { field: "labels".into(), message: format!("expected {n} labels") });
        }
        if values.len() != n {
            return Err(FieldError { field: "values".into(), message: format!("expected {n} values") });
        }
        let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let target = Observable::from_basis(&label_refs, &values, &basis).map_err(at("basis"))?;
        let posts = states("posts", &self.posts)?;
        let records = states("records", &self.records)?;
        let pointer = Observable::from_basis(&label_refs, &values, &records).map_err(at("records"))?;
        let h_d = operator("demon_hamiltonian", &self.demon_hamiltonian)?;
        let psi = state("demon_initial", &self.demon_initial)?;
        let energy = if non_conforming { None } else { Some(&h_s) };
        let model = build_standard_premeasurement(&target, &posts, &pointer, &records, &psi, &h_d, energy)
            .map_err(at("posts"))?;

        let h_w = operator("weight_hamiltonian", &self.weight_hamiltonian)?;
        let rho_w = DensityMatrix::new(operator("weight_state", &self.weight_state)?).map_err(at("weight_state"))?;
        let unitaries = self.feedback.iter().map(|u| operator("feedback", u)).collect::<Result<Vec<_>, _>>()?;
        let projectors = (0..n).map(|x| pointer.projector(x).clone()).collect();
        let scheme =
            compose_feedback_unitary(unitaries, projectors, &[h_w.dim(), h_s.dim()]).map_err(at("feedback"))?;

        let thermo = ThermoContext::new(self.temperature, self.k_b).map_err(at("temperature"))?;
        let erasure = self.erasure.mode(records.len(), &thermo).map_err(at("erasure"))?;
        let flags = EngineFlags { non_conforming, ..EngineFlags::default() };
        let tolerances = Tolerances { entropy: self.tol_s, ..Tolerances::default() };
        EngineConfig::new(
            name,
            h_s,
            rho_s,
            MeasurementStage::Model(model),
            scheme,
            WeightSpec::Generic { hamiltonian: h_w, state: rho_w },
            thermo,
            erasure,
            None,
            flags,
            tolerances,
        )
        .map_err(|e| match e {
            szilard_core::Error::Certification(msg) => FieldError {
                field: "non_conforming".into(),
                message: format!("{msg}; set non_conforming = true to run it anyway"),
            },
            other => at("explicit")(other),
        })
    }
}
