//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use qsdc::adversary::{AttackConfig, Leg, Strategy};
use qsdc::backend::{apply_phase_oracle, prepare_minus, Backend, BackendKind, OracleMode};
use qsdc::bitvec::cip_census;
use qsdc::rng::{derive_path, sim_rng};
use qsdc::runner::{run, RunConfig};
use qsdc::stats::{binomial_se, empirical_distribution, mutual_information, total_variation};
use qsdc::{BitVector, DenseState, ProtocolSession, Secrets, SessionConfig, StabilizerTableau, Variant};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: qsdc::Error) -> String {
    e.to_string()
}

// 1. Decode correctness.
fn decode_correctness() -> Outcome {
    let mut cases: Vec<(Variant, BackendKind, usize, usize)> = Vec::new();
    for m in 1..=10 {
        cases.push((Variant::TwoParty, BackendKind::Dense, m, 20));
    }
    for m in 1..=6 {
        cases.push((Variant::ThreeParty, BackendKind::Dense, m, 34));
    }
    for variant in [Variant::TwoParty, Variant::ThreeParty] {
        for m in [8, 64, 512] {
            cases.push((variant, BackendKind::Stabilizer, m, 70));
        }
    }
    let mut totals = std::collections::BTreeMap::new();
    for (i, &(variant, backend, m, trials)) in cases.iter().enumerate() {
        let config = RunConfig {
            variant,
            backend,
            m,
            trials,
            seed: 1000 + i as u64,
            oracle_mode: if i % 2 == 0 { OracleMode::Circuit } else { OracleMode::Diagonal },
            ..RunConfig::default()
        };
        let report = run(&config).map_err(err)?;
        let ok = report.trials.iter().filter(|t| t.correct).count();
        let entry = totals.entry((variant.name(), backend.to_string())).or_insert((0, 0));
        entry.0 += ok;
        entry.1 += trials;
    }
    let summary: Vec<String> = totals
        .iter()
        .map(|((v, b), (ok, n))| format!("{v}/{b} {ok}/{n}"))
        .collect();
    let pass = totals.values().all(|&(ok, n)| ok == n && n >= 200);
    check(pass, summary.join(", "))
}

// 2. Hadamard entanglement property at m = 6.
fn hadamard_entanglement() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for (i, variant) in [Variant::TwoParty, Variant::ThreeParty].into_iter().enumerate() {
        let mut rng = sim_rng(20 + i as u64);
        let secrets = match variant {
            Variant::TwoParty => Secrets::TwoParty {
                s: BitVector::random(6, &mut rng).unwrap(),
            },
            Variant::ThreeParty => Secrets::ThreeParty {
                s_b: BitVector::random(6, &mut rng).unwrap(),
                s_c: BitVector::random(6, &mut rng).unwrap(),
            },
        };
        let config = SessionConfig::new(variant, 6);
        let mut dense = ProtocolSession::<DenseState>::new(config.clone(), secrets.clone(), 3).map_err(err)?;
        let mut stab = ProtocolSession::<StabilizerTableau>::new(config, secrets, 3).map_err(err)?;
        for (name, report) in [
            ("dense", prepare_and_verify(&mut dense)?),
            ("stabilizer", prepare_and_verify(&mut stab)?),
        ] {
            let p = report.uniformity_p.unwrap_or(0.0);
            pass &= report.violations == 0 && report.shots == 10_000 && p > 0.01;
            details.push(format!(
                "{variant}/{name} {} violations in {} shots, uniformity p={p:.3}",
                report.violations, report.shots
            ));
        }
    }
    check(pass, details.join("; "))
}

fn prepare_and_verify<B: Backend>(
    s: &mut ProtocolSession<B>,
) -> Result<qsdc::protocol::HadamardReport, String> {
    s.distribute().map_err(err)?;
    s.checkpoint_distribution().map_err(err)?;
    s.embed_secret().map_err(err)?;
    s.transmit().map_err(err)?;
    s.checkpoint_return().map_err(err)?;
    s.verify_hadamard_entanglement(10_000, 77).map_err(err)
}

// 3. CIP census, checked against a direct enumeration.
fn cip_property() -> Outcome {
    let mut checked = 0u64;
    for m in 1..=10usize {
        for c in 0..(1u64 << m) {
            let cv = BitVector::from_u64(c, m).unwrap();
            let got = cip_census(&cv).map_err(err)?;
            let ones = (0..(1u64 << m)).filter(|x| (c & x).count_ones() % 2 == 1).count() as u64;
            let expected = if c == 0 { (1 << m, 0) } else { (1 << (m - 1), 1 << (m - 1)) };
            if got != expected || got != ((1 << m) - ones, ones) {
                return Err(format!("m={m} c={cv}: census {got:?}, expected {expected:?}"));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} vectors over m=1..10 match"))
}

// 4. Backend equivalence.
const EQUIV_SHOTS: usize = 10_000;

fn decrypted<B: Backend>(
    config: &SessionConfig,
    secrets: &Secrets,
    seed: u64,
) -> Result<ProtocolSession<B>, String> {
    let mut s = ProtocolSession::<B>::new(config.clone(), secrets.clone(), seed).map_err(err)?;
    s.distribute().map_err(err)?;
    s.checkpoint_distribution().map_err(err)?;
    s.embed_secret().map_err(err)?;
    s.transmit().map_err(err)?;
    s.checkpoint_return().map_err(err)?;
    s.apply_decryption_circuit().map_err(err)?;
    Ok(s)
}

fn backend_equivalence() -> Outcome {
    let mut cases = Vec::new();
    for variant in [Variant::TwoParty, Variant::ThreeParty] {
        for m in 1..=6usize {
            cases.push((variant, m, Strategy::None));
            cases.push((variant, m, Strategy::EntangleMeasure));
            if m <= 3 {
                cases.push((variant, m, Strategy::InterceptResendFake));
            }
        }
    }
    let mut worst_tv: f64 = 0.0;
    let (mut deterministic, mut random) = (0, 0);
    for (i, &(variant, m, strategy)) in cases.iter().enumerate() {
        let mut config = SessionConfig::new(variant, m).without_security();
        config.oracle_mode = OracleMode::Diagonal;
        config.attack = AttackConfig::new(strategy, Leg::Return);
        let mut rng = sim_rng(400 + i as u64);
        let secrets = match variant {
            Variant::TwoParty => Secrets::TwoParty {
                s: BitVector::random(m, &mut rng).unwrap(),
            },
            Variant::ThreeParty => Secrets::ThreeParty {
                s_b: BitVector::random(m, &mut rng).unwrap(),
                s_c: BitVector::random(m, &mut rng).unwrap(),
            },
        };
        let dense = decrypted::<DenseState>(&config, &secrets, i as u64)?;
        let stab = decrypted::<StabilizerTableau>(&config, &secrets, i as u64)?;
        let names: &[&str] = match variant {
            Variant::TwoParty => &["BR_A", "BR"],
            Variant::ThreeParty => &["AR", "AR_B", "AR_C"],
        };
        let regs: Vec<Vec<usize>> = names
            .iter()
            .map(|n| stab.register(n).map(|r| r.to_vec()))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        let all: Vec<usize> = regs.iter().flatten().copied().collect();
        let samples = stab.lab().sample(&all, EQUIV_SHOTS, 9_000 + i as u64).map_err(err)?;
        for (r, name) in names.iter().enumerate() {
            let exact = dense
                .lab()
                .exact_distribution(dense.register(name).map_err(err)?)
                .ok_or("dense distribution unavailable")?;
            let values = samples.iter().map(|s| {
                (0..m).fold(0u64, |acc, j| acc | ((s.get(r * m + j) as u64) << j))
            });
            let empirical = empirical_distribution(values, 1 << m);
            let (argmax, pmax) = exact
                .iter()
                .copied()
                .enumerate()
                .fold((0, 0.0), |best, (k, p)| if p > best.1 { (k, p) } else { best });
            if pmax > 1.0 - 1e-9 {
                deterministic += 1;
                if (empirical[argmax] - 1.0).abs() > 0.0 {
                    return Err(format!(
                        "{variant} m={m} {strategy}: register {name} deterministic on dense \
                         but stabilizer hit it in {:.4} of shots",
                        empirical[argmax]
                    ));
                }
            } else {
                random += 1;
                let tv = total_variation(&exact, &empirical).map_err(err)?;
                worst_tv = worst_tv.max(tv);
            }
        }
    }
    check(
        worst_tv <= 0.05,
        format!(
            "{} circuits; {deterministic} deterministic registers identical; \
             {random} random registers, max TV {worst_tv:.4} at {EQUIV_SHOTS} shots",
            cases.len()
        ),
    )
}

// 5. Oracle-mode equivalence.
fn oracle_mode_equivalence() -> Outcome {
    let mut rng = sim_rng(55);
    let mut worst: f64 = 1.0;
    for case in 0..100u64 {
        let m = rng.gen_range(1..=6usize);
        let amps: Vec<Complex64> = (0..1usize << m)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let s = BitVector::random(m, &mut rng).unwrap();
        let mut base = DenseState::from_amplitudes(amps, case).map_err(err)?;
        let anc = base.allocate(1).map_err(err)?.start;
        prepare_minus(&mut base, anc).map_err(err)?;
        let qubits: Vec<usize> = (0..m).collect();
        let mut diag = base.clone();
        apply_phase_oracle(&mut diag, &qubits, &s, OracleMode::Diagonal, None).map_err(err)?;
        let mut circ = base.clone();
        apply_phase_oracle(&mut circ, &qubits, &s, OracleMode::Circuit, Some(anc)).map_err(err)?;
        worst = worst.min(diag.overlap(&circ).map_err(err)?);
    }
    check(
        worst >= 1.0 - 1e-9,
        format!("100 random cases, minimum overlap {worst:.12}"),
    )
}

// 6. Attack detection rates.
const DETECTION_TRIALS: usize = 10_000;

fn attack_detection() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    let mut worst_z: f64 = 0.0;
    for variant in [Variant::TwoParty, Variant::ThreeParty] {
        for d in [1usize, 2, 4, 8, 16] {
            let config = RunConfig {
                variant,
                m: 4,
                trials: DETECTION_TRIALS,
                attack: AttackConfig::new(Strategy::MeasureResend, Leg::Return),
                decoys: Some(d),
                validate_k: Some(0),
                seed: 600 + d as u64,
                ..RunConfig::default()
            };
            let report = run(&config).map_err(err)?;
            let expected = 1.0 - 0.75f64.powi(d as i32);
            let got = report.aggregates.eavesdrop_detection_rate;
            let z = (got - expected).abs() / binomial_se(expected, DETECTION_TRIALS);
            worst_z = worst_z.max(z);
            pass &= z <= 3.0;
            details.push(format!("{variant} d={d} {got:.4}/{expected:.4}"));
        }
    }
    for k in [1usize, 2, 4, 8] {
        let config = RunConfig {
            variant: Variant::ThreeParty,
            m: 4,
            trials: DETECTION_TRIALS,
            attack: AttackConfig::new(Strategy::MeasureResend, Leg::Distribution),
            decoys: Some(0),
            validate_k: Some(k),
            seed: 700 + k as u64,
            ..RunConfig::default()
        };
        let report = run(&config).map_err(err)?;
        let cp = &report.aggregates.distribution_checkpoint;
        let expected = 1.0 - 0.5f64.powi(k as i32);
        let got = cp.validation_detection_rate;
        let z = (got - expected).abs() / binomial_se(expected, cp.reached);
        worst_z = worst_z.max(z);
        pass &= z <= 3.0 && cp.reached == DETECTION_TRIALS;
        details.push(format!("validation k={k} {got:.4}/{expected:.4}"));
    }
    check(
        pass,
        format!("max |z| {worst_z:.2} (observed/expected: {})", details.join(", ")),
    )
}

// 7. Mutual information between Eve's records and the secret.
const MI_SHOTS: u64 = 10_000;

fn mi_for(variant: Variant, attack: AttackConfig, m: usize, tag: u64) -> Result<f64, String> {
    let pairs: Result<Vec<(u64, u64)>, String> = (0..(1u64 << m))
        .into_par_iter()
        .flat_map_iter(|sv| (0..MI_SHOTS).map(move |shot| (sv, shot)))
        .map(|(sv, shot)| {
            let seed = derive_path(7_000, &[tag, sv, shot]);
            let s = BitVector::from_u64(sv, m).unwrap();
            let secrets = match variant {
                Variant::TwoParty => Secrets::TwoParty { s },
                Variant::ThreeParty => {
                    let s_b = BitVector::random(m, &mut sim_rng(seed)).unwrap();
                    let s_c = s.xor(&s_b).unwrap();
                    Secrets::ThreeParty { s_b, s_c }
                }
            };
            let mut config = SessionConfig::new(variant, m).without_security();
            config.attack = attack;
            let mut session =
                ProtocolSession::<StabilizerTableau>::new(config, secrets, seed).map_err(err)?;
            session.run_to_completion().map_err(err)?;
            let record = session
                .eve()
                .data_bits()
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i));
            Ok((sv, record))
        })
        .collect();
    Ok(mutual_information(pairs?))
}

fn security_mutual_information() -> Outcome {
    let combos = [
        (Strategy::MeasureResend, Leg::Distribution),
        (Strategy::MeasureResend, Leg::Return),
        (Strategy::InterceptResendFake, Leg::Distribution),
        (Strategy::InterceptResendFake, Leg::Return),
        (Strategy::EntangleMeasure, Leg::Return),
        (Strategy::Pns, Leg::Return),
    ];
    let mut worst: (f64, String) = (0.0, String::new());
    let mut cases = 0;
    for (vi, variant) in [Variant::TwoParty, Variant::ThreeParty].into_iter().enumerate() {
        for (ci, &(strategy, leg)) in combos.iter().enumerate() {
            for m in 1..=3usize {
                let tag = (vi * 100 + ci * 10 + m) as u64;
                let mi = mi_for(variant, AttackConfig::new(strategy, leg), m, tag)?;
                cases += 1;
                if mi >= worst.0 {
                    worst = (mi, format!("{variant} {strategy}@{leg} m={m}"));
                }
            }
        }
    }
    check(
        worst.0 < 0.01,
        format!(
            "{cases} attack/leg/variant/m cases, max MI {:.5} bits ({})",
            worst.0, worst.1
        ),
    )
}

// 8. Performance.
fn performance() -> Outcome {
    let stab = RunConfig {
        m: 2048,
        trials: 1,
        seed: 8,
        ..RunConfig::default()
    };
    let t = Instant::now();
    let r = run(&stab).map_err(err)?;
    let stab_secs = t.elapsed().as_secs_f64();
    let dense = RunConfig {
        m: 10,
        trials: 1,
        backend: BackendKind::Dense,
        seed: 8,
        ..RunConfig::default()
    };
    let t = Instant::now();
    let d = run(&dense).map_err(err)?;
    let dense_secs = t.elapsed().as_secs_f64();
    let correct = r.trials[0].correct && d.trials[0].correct;
    let security = r.config.decoys == Some(512) && r.config.validate_k == Some(512);
    check(
        correct && security && stab_secs < 5.0 && dense_secs < 10.0,
        format!(
            "stabilizer m=2048 with security {stab_secs:.2}s (limit 5s), dense m=10 {dense_secs:.2}s (limit 10s)"
        ),
    )
}

// 9. Determinism.
fn determinism() -> Outcome {
    let config = RunConfig {
        variant: Variant::ThreeParty,
        m: 6,
        trials: 8,
        attack: AttackConfig::new(Strategy::MeasureResend, Leg::Return),
        seed: 99,
        ..RunConfig::default()
    };
    let a = run(&config).map_err(err)?.to_json().map_err(err)?;
    let b = run(&config).map_err(err)?.to_json().map_err(err)?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for i in 0..2 {
        let path = dir.path().join(format!("report{i}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_qsdc"))
            .args(["run", "--variant", "2p", "--m", "8", "--trials", "16", "--seed", "5"])
            .args(["--attack", "intercept-resend-fake", "--leg", "distribution", "--out"])
            .arg(&path)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("binary exited with {}", status.status));
        }
        outputs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    check(
        a == b && outputs[0] == outputs[1],
        format!(
            "library reports {} bytes identical: {}; binary reports {} bytes identical: {}",
            a.len(),
            a == b,
            outputs[0].len(),
            outputs[0] == outputs[1]
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("decode correctness", decode_correctness),
        ("hadamard entanglement property", hadamard_entanglement),
        ("CIP property", cip_property),
        ("backend equivalence", backend_equivalence),
        ("oracle-mode equivalence", oracle_mode_equivalence),
        ("attack detection", attack_detection),
        ("information-theoretic security", security_mutual_information),
        ("performance", performance),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = f();
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {} {name}: PASS [{secs:.1}s] {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL [{secs:.1}s] {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
