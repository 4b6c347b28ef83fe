use num_complex::Complex64;

use qsdc::backend::{Backend, OracleMode};
use qsdc::runner::{run, RunConfig};
use qsdc::stats::binomial_se;
use qsdc::{
    AttackConfig, BackendKind, BitVector, DenseState, Leg, ProtocolSession, Secrets, SessionConfig,
    Strategy, Variant,
};

fn all_secrets(variant: Variant, m: usize) -> Vec<Secrets> {
    let n = 1u64 << m;
    let bv = |v| BitVector::from_u64(v, m).unwrap();
    match variant {
        Variant::TwoParty => (0..n).map(|s| Secrets::TwoParty { s: bv(s) }).collect(),
        Variant::ThreeParty => (0..n)
            .flat_map(|b| (0..n).map(move |c| (b, c)))
            .map(|(b, c)| Secrets::ThreeParty { s_b: bv(b), s_c: bv(c) })
            .collect(),
    }
}

fn attacked(variant: Variant, m: usize, strategy: Strategy, leg: Leg) -> SessionConfig {
    let mut config = SessionConfig::new(variant, m).without_security();
    config.oracle_mode = OracleMode::Diagonal;
    config.attack = AttackConfig::new(strategy, leg);
    config
}

fn expectation(state: &DenseState, paulis: &[(usize, char)]) -> Complex64 {
    let mut moved = state.clone();
    for &(q, p) in paulis {
        match p {
            'X' => moved.x(q).unwrap(),
            'Z' => moved.z(q).unwrap(),
            _ => unreachable!(),
        }
    }
    state.inner_product(&moved).unwrap()
}

#[test]
fn entangle_measure_extends_ghz_by_one_qubit() {
    let config = attacked(Variant::ThreeParty, 1, Strategy::EntangleMeasure, Leg::Return);
    let secrets = Secrets::ThreeParty {
        s_b: BitVector::zeros(1).unwrap(),
        s_c: BitVector::zeros(1).unwrap(),
    };
    let mut s = ProtocolSession::<DenseState>::new(config, secrets, 5).unwrap();
    s.distribute().unwrap();
    s.checkpoint_distribution().unwrap();
    s.embed_secret().unwrap();
    s.transmit().unwrap();
    let a = s.register("AR").unwrap()[0];
    let sys = s.lab().system_of(a).unwrap();
    let (state, members) = s.lab().system(sys).unwrap();
    assert_eq!(members.len(), 4);
    let local = |q| members.iter().position(|&m| m == q).unwrap();
    let b = local(s.register("AR_B").unwrap()[0]);
    let c = local(s.register("AR_C").unwrap()[0]);
    let e = local(s.eve().held()[0].1);
    let a = local(a);
    let all_x = expectation(state, &[(a, 'X'), (b, 'X'), (c, 'X'), (e, 'X')]);
    assert!((all_x - 1.0).norm() < 1e-12, "{all_x}");
    for (p, q) in [(a, b), (b, c), (c, e), (a, e)] {
        let zz = expectation(state, &[(p, 'Z'), (q, 'Z')]);
        assert!((zz - 1.0).norm() < 1e-12, "{zz}");
    }
    // Single-qubit X expectations vanish: the ancilla is entangled, not a copy.
    assert!(expectation(state, &[(e, 'X')]).norm() < 1e-12);
}

#[test]
fn entangle_measure_on_return_randomises_the_decode() {
    for variant in [Variant::TwoParty, Variant::ThreeParty] {
        let max_m = if variant == Variant::TwoParty { 4 } else { 2 };
        for m in 1..=max_m {
            let config = attacked(variant, m, Strategy::EntangleMeasure, Leg::Return);
            for (i, secrets) in all_secrets(variant, m).into_iter().enumerate() {
                let target = secrets.target().to_u64().unwrap() as usize;
                let mut s = ProtocolSession::<DenseState>::new(config.clone(), secrets, i as u64).unwrap();
                s.distribute().unwrap();
                s.checkpoint_distribution().unwrap();
                s.embed_secret().unwrap();
                s.transmit().unwrap();
                s.checkpoint_return().unwrap();
                s.apply_decryption_circuit().unwrap();
                let out = s.register(s.output_register()).unwrap().to_vec();
                let dist = s.lab().exact_distribution(&out).unwrap();
                let wrong = 1.0 - dist[target];
                let expected = 1.0 - 0.5f64.powi(m as i32);
                assert!((wrong - expected).abs() < 1e-9, "{variant} m={m}: {wrong}");
            }
        }
    }
}

#[test]
fn measure_resend_on_return_sees_secret_independent_statistics() {
    for variant in [Variant::TwoParty, Variant::ThreeParty] {
        let sent: &[&str] = match variant {
            Variant::TwoParty => &["AR"],
            Variant::ThreeParty => &["BR", "CR"],
        };
        for m in 1..=3 {
            let config = attacked(variant, m, Strategy::MeasureResend, Leg::Return);
            let mut reference: Option<Vec<f64>> = None;
            for secrets in all_secrets(variant, m) {
                let mut s = ProtocolSession::<DenseState>::new(config.clone(), secrets, 1).unwrap();
                s.distribute().unwrap();
                s.checkpoint_distribution().unwrap();
                s.embed_secret().unwrap();
                let qubits: Vec<usize> = sent
                    .iter()
                    .flat_map(|r| s.register(r).unwrap().to_vec())
                    .collect();
                let dist = s.lab().exact_distribution(&qubits).unwrap();
                match &reference {
                    None => reference = Some(dist),
                    Some(r) => {
                        for (p, q) in r.iter().zip(&dist) {
                            assert!((p - q).abs() < 1e-12, "{variant} m={m}");
                        }
                    }
                }
            }
        }
    }
}

fn detection_config(strategy: Strategy, leg: Leg, decoys: usize, trials: usize, seed: u64) -> RunConfig {
    RunConfig {
        variant: Variant::TwoParty,
        backend: BackendKind::Stabilizer,
        m: 4,
        trials,
        seed,
        attack: AttackConfig::new(strategy, leg),
        decoys: Some(decoys),
        validate_k: Some(0),
        ..RunConfig::default()
    }
}

fn assert_rate(observed: f64, expected: f64, trials: usize, label: &str) {
    let se = binomial_se(expected, trials).max(1e-12);
    let z = (observed - expected) / se;
    assert!(z.abs() < 4.0, "{label}: observed {observed}, expected {expected}, z {z:.2}");
}

#[test]
fn pns_and_entangle_measure_detect_alike() {
    const TRIALS: usize = 4000;
    for d in [1, 3, 6] {
        let em = run(&detection_config(Strategy::EntangleMeasure, Leg::Return, d, TRIALS, 11)).unwrap();
        let pns = run(&detection_config(Strategy::Pns, Leg::Return, d, TRIALS, 11)).unwrap();
        // Each X-basis decoy (probability 1/2) is randomised (1/2).
        let expected = 1.0 - 0.75f64.powi(d as i32);
        assert_rate(em.aggregates.eavesdrop_detection_rate, expected, TRIALS, &format!("em d={d}"));
        assert_rate(pns.aggregates.eavesdrop_detection_rate, expected, TRIALS, &format!("pns d={d}"));
        let se = 2.0f64.sqrt() * binomial_se(expected, TRIALS);
        let gap = em.aggregates.eavesdrop_detection_rate - pns.aggregates.eavesdrop_detection_rate;
        assert!(gap.abs() < 4.0 * se, "d={d}: em/pns gap {gap}");
    }
}

#[test]
fn fake_state_detection_rate() {
    const TRIALS: usize = 4000;
    for d in [1, 2, 3, 5] {
        let r = run(&detection_config(Strategy::InterceptResendFake, Leg::Return, d, TRIALS, 12)).unwrap();
        let expected = 1.0 - 0.5f64.powi(d as i32);
        assert_rate(r.aggregates.eavesdrop_detection_rate, expected, TRIALS, &format!("fake d={d}"));
    }
}

#[test]
fn random_basis_measure_resend_decoy_rate() {
    const TRIALS: usize = 8000;
    let mut config = detection_config(Strategy::MeasureResend, Leg::Return, 1, TRIALS, 13);
    config.attack.random_basis = true;
    let r = run(&config).unwrap();
    // Wrong basis with probability 1/2, then a wrong outcome with probability 1/2.
    assert_rate(r.aggregates.eavesdrop_detection_rate, 0.25, TRIALS, "random basis");
}
