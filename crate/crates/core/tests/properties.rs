use proptest::prelude::*;
use szilard_core::engine::{
    evaluate_features, random_config, run_cycle, scenario_library, MeasurementStage, ScanFamily, ScenarioParams,
};
use szilard_core::feedback::{build_oscillator_weight, form_defect, probe_defect};
use szilard_core::measurement::{check_repeatable, MeasurementModel};
use szilard_core::qop::{
    energy_blocks, partial_trace_dims, relative_entropy, tensor_product, thermal_state, von_neumann_entropy,
    DensityMatrix, Operator, PureState, C64, EPS_ALG,
};
use szilard_core::random::{haar_unitary, instance_rng, random_block_unitary, random_density};
use szilard_core::thermo::{free_energy, work_per_outcome, ThermoContext};

fn family() -> impl Strategy<Value = ScanFamily> {
    prop_oneof![Just(ScanFamily::Repeatable), Just(ScanFamily::Purifying), Just(ScanFamily::Cooling)]
}

fn marginal(rho: &DensityMatrix, dims: &[usize], keep: &[usize]) -> DensityMatrix {
    DensityMatrix::from_matrix(partial_trace_dims(rho.matrix(), dims, keep)).unwrap()
}

fn random_hamiltonian(d: usize, seed: u64) -> Operator {
    let mut rng = instance_rng(seed, 1);
    let u = haar_unitary(d, &mut rng);
    let levels: Vec<f64> = (0..d).map(|i| 0.7 * i as f64 + 0.3 * (seed % 5) as f64 * (i % 2) as f64).collect();
    u.mul(&Operator::from_diagonal(&levels)).unwrap().mul(&u.adjoint()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partial_trace_preserves_trace(a in 1usize..4, b in 1usize..4, c in 1usize..3, seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 0);
        let rho = random_density(a * b * c, &mut rng);
        for keep in [vec![0], vec![1], vec![0, 2], vec![1, 2]] {
            let m = marginal(&rho, &[a, b, c], &keep);
            prop_assert!((m.trace() - rho.trace()).abs() <= EPS_ALG);
        }
    }

    #[test]
    fn entropy_is_subadditive(a in 2usize..4, b in 2usize..4, seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 0);
        let rho = random_density(a * b, &mut rng);
        let s = von_neumann_entropy(&rho);
        let sa = von_neumann_entropy(&marginal(&rho, &[a, b], &[0]));
        let sb = von_neumann_entropy(&marginal(&rho, &[a, b], &[1]));
        prop_assert!(s <= sa + sb + EPS_ALG);
    }

    #[test]
    fn entropy_is_unitarily_invariant(d in 2usize..7, seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 0);
        let rho = random_density(d, &mut rng);
        let u = haar_unitary(d, &mut rng);
        let s2 = von_neumann_entropy(&rho.evolve(&u).unwrap());
        prop_assert!((von_neumann_entropy(&rho) - s2).abs() <= 1e-9);
    }

    #[test]
    fn relative_entropy_is_nonnegative(d in 2usize..6, seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 0);
        let rho = random_density(d, &mut rng);
        let sigma = random_density(d, &mut rng);
        prop_assert!(relative_entropy(&rho, &sigma).unwrap() >= -EPS_ALG);
        prop_assert!(relative_entropy(&rho, &rho).unwrap().abs() <= EPS_ALG);
    }

    #[test]
    fn thermal_state_minimizes_free_energy(d in 2usize..5, t in 0.3f64..3.0, seed in any::<u64>()) {
        let ctx = ThermoContext::new(t, 1.0).unwrap();
        let h = random_hamiltonian(d, seed);
        let tau = thermal_state(&h, ctx.beta()).unwrap();
        let f_tau = free_energy(&tau, &h, &ctx).unwrap();
        let mut rng = instance_rng(seed, 2);
        for _ in 0..20 {
            let rho = random_density(d, &mut rng);
            prop_assert!(free_energy(&rho, &h, &ctx).unwrap() > f_tau);
        }
    }

    #[test]
    fn generated_models_are_unitary_and_follow_born(f in family(), seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 0);
        let (config, _) = random_config(f, &mut rng).unwrap();
        let MeasurementStage::Model(model) = &config.measurement else { unreachable!() };
        prop_assert!(model.premeasurement().is_unitary());
        prop_assert!(model.check_mapping().unwrap() >= 1.0 - 1e-9);
        let result = run_cycle(&config).unwrap();
        for (x, b) in result.branches.iter().enumerate() {
            let born = config.rho_s.expectation(model.target().projector(x)).unwrap();
            prop_assert!((b.probability - born).abs() <= 1e-9);
        }
    }

    #[test]
    fn unselective_measurement_is_unital(f in family(), seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 0);
        let (config, _) = random_config(f, &mut rng).unwrap();
        let MeasurementStage::Model(model) = &config.measurement else { unreachable!() };
        prop_assert!(unselective_unitality_defect(model) <= 1e-9);
    }

    #[test]
    fn repeatability_matches_eigen_posts(seed in any::<u64>(), pick in 0usize..4, q in 0.05f64..0.95, n in 2usize..40) {
        // Non-degenerate system Hamiltonians only.
        let config = match pick {
            0 => scenario_library("example_I", &ScenarioParams { q, n, ..ScenarioParams::default() }).unwrap(),
            1 => scenario_library("example_II", &ScenarioParams { q, n, ..ScenarioParams::default() }).unwrap(),
            _ => {
                let f = if pick == 2 { ScanFamily::Repeatable } else { ScanFamily::Purifying };
                random_config(f, &mut instance_rng(seed, 0)).unwrap().0
            }
        };
        let MeasurementStage::Model(model) = &config.measurement else { unreachable!() };
        let h = &config.h_s;
        let eigen_posts = model.post_states().iter().flatten().all(|p| {
            let hp = h.apply(p.vector()).unwrap();
            let e = h.matrix_element(p, p).unwrap();
            (hp - p.vector() * e).norm() <= 1e-9
        });
        prop_assert_eq!(check_repeatable(model).pass, eigen_posts);
    }

    #[test]
    fn cycles_keep_marginals_and_objectification_order(f in family(), seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 0);
        let (config, _) = random_config(f, &mut rng).unwrap();
        let r = run_cycle(&config).unwrap();
        prop_assert!((r.probabilities().iter().sum::<f64>() - 1.0).abs() <= EPS_ALG);
        prop_assert!(r.order_defect.unwrap() <= 1e-10);
        prop_assert!(r.marginal_defect.unwrap() <= EPS_ALG);
        prop_assert!(r.entropy_chain_slack >= -1e-9);
        prop_assert!(r.ledger.concavity_gap >= -1e-9);
        prop_assert!(r.ledger.w_coarse <= r.ledger.w_avg + 1e-9);
        for b in &r.branches {
            let internal = b.system_side_work.expect("conforming configs carry the system-side form");
            prop_assert!((internal - b.work).abs() <= 1e-9);
        }
        let features = evaluate_features(&r, &config).unwrap();
        prop_assert!(features.exclusion_checked);
        prop_assert!(features.triple() != (true, true, true));
    }

    #[test]
    fn thermal_input_obeys_second_law(f in family(), seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 0);
        let (config, _) = random_config(f, &mut rng).unwrap();
        let tau = thermal_state(&config.h_s, config.thermo.beta()).unwrap();
        let config = config.with_rho_s(tau).unwrap();
        let r = run_cycle(&config).unwrap();
        prop_assert!(r.ledger.w_net_coarse <= 1e-9);
    }

    #[test]
    fn form_and_probe_tests_agree(f in family(), seed in any::<u64>(), eps in prop_oneof![Just(0.0), 1e-3f64..0.1]) {
        let mut rng = instance_rng(seed, 0);
        let (config, _) = random_config(f, &mut rng).unwrap();
        let scheme = &config.feedback;
        let v = scheme.composed();
        // Blend with a Haar unitary and re-unitarize.
        let u = haar_unitary(v.dim(), &mut rng);
        let perturbed = if eps == 0.0 {
            v.clone()
        } else {
            let m = v.matrix() * C64::new(1.0 - eps, 0.0) + u.matrix() * C64::new(eps, 0.0);
            let q = m.qr().q();
            Operator::from_matrix(q).unwrap()
        };
        let dims = scheme.branch_dims();
        let form = form_defect(&perturbed, scheme.demon_projectors(), dims).unwrap() <= 1e-9;
        let probe = probe_defect(&perturbed, scheme.branch_unitaries(), scheme.demon_projectors(), dims).unwrap() <= 1e-9;
        prop_assert_eq!(form, probe);
        prop_assert_eq!(form, eps == 0.0);
    }

    #[test]
    fn weight_gain_never_beats_system_free_energy(
        d in 2usize..4,
        n in 2usize..6,
        t in 0.5f64..2.0,
        seed in any::<u64>(),
        thermal in any::<bool>(),
    ) {
        let ctx = ThermoContext::new(t, 1.0).unwrap();
        let mut rng = instance_rng(seed, 0);
        let levels: Vec<f64> = (0..d).map(|i| (i * (i + 1) / 2) as f64).collect();
        let h_s = Operator::from_diagonal(&levels);
        let w = build_oscillator_weight(1.0, n, n + 4).unwrap();
        let h_w = w.hamiltonian().unwrap();
        let h = tensor_product(&h_w, &Operator::identity(d)).unwrap()
            .add(&tensor_product(&Operator::identity(w.dim()), &h_s).unwrap()).unwrap();
        let u = random_block_unitary(h.dim(), &energy_blocks(&h, EPS_ALG).unwrap(), &mut rng);
        let rho_s = if thermal { thermal_state(&h_s, ctx.beta()).unwrap() } else { random_density(d, &mut rng) };
        let rho_w = w.initial().density();
        let out = rho_w.tensor(&rho_s).unwrap().evolve(&u).unwrap();
        let w_after = marginal(&out, &[w.dim(), d], &[0]);
        let s_after = marginal(&out, &[w.dim(), d], &[1]);
        let work = work_per_outcome(&rho_w, &w_after, &h_w, &ctx).unwrap();
        let bound = free_energy(&rho_s, &h_s, &ctx).unwrap() - free_energy(&s_after, &h_s, &ctx).unwrap();
        prop_assert!(work <= bound + 1e-9);
        if thermal {
            prop_assert!(work <= 1e-9);
        }
    }

    #[test]
    fn one_quantum_shift_translates_the_weight(n in 5usize..60, q in 0.1f64..0.9) {
        let p = ScenarioParams { n, q, ..ScenarioParams::default() };
        let config = scenario_library("example_II", &p).unwrap();
        let r = run_cycle(&config).unwrap();
        let dim = n + 4;
        let amp = (n as f64).sqrt().recip();
        let translated = |shift: usize| {
            let v: Vec<f64> = (0..dim).map(|l| if (2 + shift..2 + shift + n).contains(&l) { amp } else { 0.0 }).collect();
            PureState::from_real(&v).unwrap()
        };
        for b in &r.branches {
            // Either branch raises the weight by one quantum on the φ_− part.
            let fidelity = b.weight_after.population(&translated(1)).unwrap();
            prop_assert!(fidelity >= 1.0 - 2.0 / n as f64, "N={} fidelity={}", n, fidelity);
        }
    }

    #[test]
    fn reservoir_chain_holds(coupling in 0.0f64..=1.0, q in 0.0f64..=1.0, k in 1u32..4) {
        let p = ScenarioParams { coupling, q, dim_r: 1 << k, ..ScenarioParams::default() };
        let config = scenario_library("reservoir_circumvention", &p).unwrap();
        let r = run_cycle(&config).unwrap();
        for (b, bound) in r.branches.iter().zip(r.reservoir_bounds.as_ref().unwrap()) {
            prop_assert!(bound.subadditivity_gap >= -EPS_ALG);
            prop_assert!(bound.slack() >= -1e-9);
            prop_assert!(b.work <= config.thermo.kt() * 2f64.ln() + 1e-9);
        }
    }
}

/// `‖Σ_x P_D^x U_M (1/d) U_M† P_D^x − 1/d‖`
fn unselective_unitality_defect(model: &MeasurementModel) -> f64 {
    let d_s = model.system_dim();
    let d_d = model.demon_dim();
    let n = d_s * d_d;
    let u = model.premeasurement();
    let mixed = Operator::identity(n).scale(1.0 / n as f64);
    let pre = u.mul(&mixed).unwrap().mul(&u.adjoint()).unwrap();
    let mut sum = Operator::zeros(n);
    for x in 0..model.target().len() {
        let p = tensor_product(&Operator::identity(d_s), model.pointer().projector(x)).unwrap();
        sum = sum.add(&p.mul(&pre).unwrap().mul(&p).unwrap()).unwrap();
    }
    sum.sub(&mixed).unwrap().operator_norm()
}
