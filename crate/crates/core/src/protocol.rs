//! Two- and three-party secure direct communication sessions.
//!
//! Two-party: Alice prepares `m` Φ⁺ pairs (registers AR, BR) and sends BR to
//! Bob. She embeds `s` with the phase oracle `(−1)^{s·x}` on AR and sends AR
//! to Bob, who files it as BR_A. Bob applies `H⊗m` to BR and BR_A, a CNOT from
//! each BR_A qubit onto the matching BR qubit, and reads `s` from BR.
//!
//! Three-party: Alice prepares `m` GHZ₃ triplets (AR, BR, CR) and sends BR to
//! Bob and CR to Charlie. They embed `s_B` and `s_C` and return their
//! registers, which Alice files as AR_B and AR_C. She applies `H⊗m` to all
//! three registers, CNOTs AR→AR_B then AR_B→AR_C, and reads `s_B ⊕ s_C` from
//! AR_C.
//!
//! With security enabled each leg carries decoys, and `2k` sacrificial tuples
//! are prepared next to the data: the first `k` are checked after
//! distribution, the other `k` travel the return leg and are checked before
//! decoding. In circuit oracle mode the embedding parties use a `|−⟩`
//! ancilla (AQ, or BQ and CQ) for phase kickback.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adversary::{
    insert_decoys, intercept, run_eavesdropping_detection, run_entanglement_validation,
    AttackConfig, DecoyPlan, EveState, Leg, SecurityReport, SlotKind, Transmission,
};
use crate::backend::{
    prepare_ghz3_triplets, prepare_phi_plus_pairs, Backend, Basis, Limits, OracleMode,
    RegisterLayout,
};
use crate::bitvec::BitVector;
use crate::error::{Error, Result};
use crate::lab::{Lab, Qid};
use crate::rng::{derive_seed, purpose, sim_rng, SimRng};
use crate::stats::chi_square_uniform_p;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Variant {
    #[default]
    #[serde(rename = "2p")]
    TwoParty,
    #[serde(rename = "3p")]
    ThreeParty,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::TwoParty => "2p",
            Variant::ThreeParty => "3p",
        }
    }

    /// Members per entangled tuple.
    pub fn arity(self) -> usize {
        match self {
            Variant::TwoParty => 2,
            Variant::ThreeParty => 3,
        }
    }

    /// Qubits in the data system: the tuples plus kickback ancillas.
    pub fn data_qubits(self, m: usize, mode: OracleMode) -> usize {
        let ancillas = match mode {
            OracleMode::Diagonal => 0,
            OracleMode::Circuit => self.arity() - 1,
        };
        self.arity() * m + ancillas
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "2p" => Ok(Variant::TwoParty),
            "3p" => Ok(Variant::ThreeParty),
            _ => Err(Error::Parse(format!("unknown variant `{s}` (expected 2p or 3p)"))),
        }
    }
}

/// The embedded secrets. In the three-party protocol the decoded value is
/// `s_b ⊕ s_c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "variant")]
pub enum Secrets {
    TwoParty { s: BitVector },
    ThreeParty { s_b: BitVector, s_c: BitVector },
}

impl Secrets {
    pub fn variant(&self) -> Variant {
        match self {
            Secrets::TwoParty { .. } => Variant::TwoParty,
            Secrets::ThreeParty { .. } => Variant::ThreeParty,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Secrets::TwoParty { s } => s.len(),
            Secrets::ThreeParty { s_b, .. } => s_b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn target(&self) -> BitVector {
        match self {
            Secrets::TwoParty { s } => s.clone(),
            Secrets::ThreeParty { s_b, s_c } => s_b.xor(s_c).expect("equal lengths"),
        }
    }

    fn check(&self) -> Result<()> {
        if let Secrets::ThreeParty { s_b, s_c } = self {
            if s_b.len() != s_c.len() {
                return Err(Error::Dimension {
                    expected: s_b.len(),
                    found: s_c.len(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Initial,
    Distributed,
    Embedded,
    Transmitted,
    Decoded,
    Aborted,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Initial => "initial",
            Phase::Distributed => "distributed",
            Phase::Embedded => "embedded",
            Phase::Transmitted => "transmitted",
            Phase::Decoded => "decoded",
            Phase::Aborted => "aborted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecurityConfig {
    pub enabled: bool,
    /// Decoys inserted on each leg.
    pub decoys: usize,
    /// Sacrificial tuples checked at each checkpoint.
    pub validate_k: usize,
}

impl SecurityConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            decoys: 0,
            validate_k: 0,
        }
    }

    /// `⌈m/4⌉` decoys per leg and tuples per checkpoint.
    pub fn default_for(m: usize) -> Self {
        Self {
            enabled: true,
            decoys: m.div_ceil(4),
            validate_k: m.div_ceil(4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionConfig {
    pub variant: Variant,
    pub m: usize,
    pub oracle_mode: OracleMode,
    pub security: SecurityConfig,
    pub attack: AttackConfig,
    pub limits: Limits,
}

impl SessionConfig {
    /// No attack, default security and circuit-mode oracles.
    pub fn new(variant: Variant, m: usize) -> Self {
        Self {
            variant,
            m,
            oracle_mode: OracleMode::Circuit,
            security: SecurityConfig::default_for(m),
            attack: AttackConfig::none(),
            limits: Limits::default(),
        }
    }

    pub fn without_security(mut self) -> Self {
        self.security = SecurityConfig::disabled();
        self
    }
}

/// Transcript entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "event")]
pub enum Event {
    Distributed {
        tuples: usize,
        validation_tuples: usize,
        decoys: usize,
        intercepted: bool,
    },
    Checkpoint {
        leg: Leg,
        report: SecurityReport,
    },
    Embedded {
        oracle_mode: OracleMode,
    },
    Transmitted {
        decoys: usize,
        intercepted: bool,
    },
    DecryptionApplied,
    Decoded {
        value: BitVector,
    },
    Aborted {
        leg: Leg,
    },
}

/// Result of [`ProtocolSession::verify_hadamard_entanglement`].
#[derive(Debug, Clone, PartialEq)]
pub struct HadamardReport {
    pub shots: usize,
    /// Shots whose register outcomes do not XOR to the secret.
    pub violations: usize,
    /// Chi-square p-value for uniformity of the first register's outcome;
    /// `None` when the register is too wide to bin.
    pub uniformity_p: Option<f64>,
}

/// How a completed run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub decoded: Option<BitVector>,
    pub aborted_at: Option<Leg>,
}

const MAX_UNIFORMITY_BITS: usize = 16;

#[derive(Debug, Clone)]
pub struct ProtocolSession<B: Backend> {
    config: SessionConfig,
    secrets: Secrets,
    phase: Phase,
    lab: Lab<B>,
    layout: RegisterLayout,
    /// `validation[set][tuple][party]`.
    validation: [Vec<Vec<Qid>>; 2],
    in_flight: Option<(Transmission, DecoyPlan)>,
    reports: [Option<SecurityReport>; 2],
    passed: [bool; 2],
    decrypted: bool,
    eve: EveState,
    rng: SimRng,
    eve_rng: SimRng,
    transcript: Vec<Event>,
}

fn phase_error(operation: &'static str, expected: Phase, found: Phase) -> Error {
    Error::Phase {
        operation,
        expected: expected.name(),
        found: found.name(),
    }
}

impl<B: Backend> ProtocolSession<B> {
    pub fn new(config: SessionConfig, secrets: Secrets, seed: u64) -> Result<Self> {
        if config.m == 0 {
            return Err(Error::Config {
                field: "m".into(),
                message: "message length must be at least 1".into(),
            });
        }
        secrets.check()?;
        if secrets.variant() != config.variant {
            return Err(Error::Argument(format!(
                "secrets are for the {} protocol but the session runs {}",
                secrets.variant(),
                config.variant
            )));
        }
        if secrets.len() != config.m {
            return Err(Error::Dimension {
                expected: config.m,
                found: secrets.len(),
            });
        }
        config.attack.validate()?;
        let lab = Lab::new(derive_seed(seed, purpose::MEASUREMENT), config.limits);
        Ok(Self {
            config,
            secrets,
            phase: Phase::Initial,
            lab,
            layout: RegisterLayout::new(),
            validation: [Vec::new(), Vec::new()],
            in_flight: None,
            reports: [None, None],
            passed: [false, false],
            decrypted: false,
            eve: EveState::new(),
            rng: sim_rng(derive_seed(seed, purpose::PROTOCOL)),
            eve_rng: sim_rng(derive_seed(seed, purpose::EVE)),
            transcript: Vec::new(),
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn secrets(&self) -> &Secrets {
        &self.secrets
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn register(&self, name: &str) -> Result<&[Qid]> {
        self.layout.get(name)
    }

    pub fn lab(&self) -> &Lab<B> {
        &self.lab
    }

    pub fn transcript(&self) -> &[Event] {
        &self.transcript
    }

    pub fn eve(&self) -> &EveState {
        &self.eve
    }

    /// Reports of the distribution and return checkpoints, once run.
    pub fn reports(&self) -> [Option<SecurityReport>; 2] {
        self.reports
    }

    fn expect_phase(&self, operation: &'static str, expected: Phase) -> Result<()> {
        if self.phase != expected {
            return Err(phase_error(operation, expected, self.phase));
        }
        Ok(())
    }

    fn security(&self) -> bool {
        self.config.security.enabled
    }

    fn reg(&self, name: &str) -> Vec<Qid> {
        self.layout.get(name).expect("register present").to_vec()
    }

    /// Prepares the entangled tuples, ancillas and sacrificial tuples and
    /// sends the distribution leg.
    pub fn distribute(&mut self) -> Result<()> {
        self.expect_phase("distribute", Phase::Initial)?;
        let (m, variant) = (self.config.m, self.config.variant);
        let limits = *self.lab.limits();
        let backend = match variant {
            Variant::TwoParty => prepare_phi_plus_pairs::<B>(m, 0, &limits)?.0,
            Variant::ThreeParty => prepare_ghz3_triplets::<B>(m, 0, &limits)?.0,
        };
        let ids = self.lab.insert(backend);
        let names: &[&str] = match variant {
            Variant::TwoParty => &["AR", "BR"],
            Variant::ThreeParty => &["AR", "BR", "CR"],
        };
        for (p, name) in names.iter().enumerate() {
            self.layout.add(name, ids[p * m..(p + 1) * m].to_vec())?;
        }
        if self.config.oracle_mode == OracleMode::Circuit {
            let ancillas: &[&str] = match variant {
                Variant::TwoParty => &["AQ"],
                Variant::ThreeParty => &["BQ", "CQ"],
            };
            for name in ancillas {
                let q = self.lab.create(1)?[0];
                self.lab.x(q)?;
                self.lab.h(q)?;
                self.layout.add(name, vec![q])?;
            }
        }
        let k = if self.security() { self.config.security.validate_k } else { 0 };
        for set in 0..2 {
            for _ in 0..k {
                let t = self.lab.create(variant.arity())?;
                self.lab.h(t[0])?;
                for &q in &t[1..] {
                    self.lab.cnot(t[0], q)?;
                }
                self.validation[set].push(t);
            }
        }

        // Bob (and Charlie) receive their register and their members of
        // both validation sets.
        let payloads = (1..variant.arity())
            .map(|party| {
                let mut p: Vec<(Qid, SlotKind)> = self
                    .reg(names[party])
                    .into_iter()
                    .enumerate()
                    .map(|(index, q)| (q, SlotKind::Data { index }))
                    .collect();
                for (set, tuples) in self.validation.iter().enumerate() {
                    for (tuple, t) in tuples.iter().enumerate() {
                        p.push((t[party], SlotKind::Validation { set, tuple }));
                    }
                }
                p
            })
            .collect();
        let (decoys, intercepted) = self.send(Leg::Distribution, payloads)?;
        self.phase = Phase::Distributed;
        self.transcript.push(Event::Distributed {
            tuples: m,
            validation_tuples: 2 * k,
            decoys,
            intercepted,
        });
        Ok(())
    }

    /// Inserts decoys, lets the adversary act, and files what arrives.
    fn send(&mut self, leg: Leg, payloads: Vec<Vec<(Qid, SlotKind)>>) -> Result<(usize, bool)> {
        let mut tx = Transmission::interleave(payloads);
        let plan = if self.security() {
            DecoyPlan::random(self.config.security.decoys, tx.slots.len(), tx.streams, &mut self.rng)
        } else {
            DecoyPlan::empty()
        };
        insert_decoys(&mut self.lab, &mut tx, &plan)?;
        let intercepted = intercept(
            &mut self.lab,
            &mut tx,
            leg,
            &self.config.attack,
            &mut self.eve,
            &mut self.eve_rng,
        )?;
        self.deliver(leg, &tx)?;
        let decoys = plan.len();
        self.in_flight = Some((tx, plan));
        Ok((decoys, intercepted))
    }

    /// Records which qubits actually arrived in each receiving register.
    fn deliver(&mut self, leg: Leg, tx: &Transmission) -> Result<()> {
        let variant = self.config.variant;
        let (sources, targets): (&[&str], &[&str]) = match (variant, leg) {
            (Variant::TwoParty, Leg::Distribution) => (&["BR"], &["BR"]),
            (Variant::ThreeParty, Leg::Distribution) => (&["BR", "CR"], &["BR", "CR"]),
            (Variant::TwoParty, Leg::Return) => (&["AR"], &["BR_A"]),
            (Variant::ThreeParty, Leg::Return) => (&["BR", "CR"], &["AR_B", "AR_C"]),
        };
        let mut registers: Vec<Vec<Qid>> = sources.iter().map(|s| self.reg(s)).collect();
        for slot in &tx.slots {
            let party = match (variant, leg) {
                (Variant::TwoParty, Leg::Return) => 0,
                _ => slot.stream + 1,
            };
            match slot.kind {
                SlotKind::Data { index } => registers[slot.stream][index] = slot.qid,
                SlotKind::Validation { set, tuple } => {
                    self.validation[set][tuple][party] = slot.qid
                }
                SlotKind::Decoy { .. } => {}
            }
        }
        for ((source, target), qubits) in sources.iter().zip(targets).zip(registers) {
            if source != target {
                self.layout.rename(source, target)?;
            }
            self.layout.reassign(target, qubits)?;
        }
        Ok(())
    }

    /// Security tests on the leg in flight. Returns `None` when security is
    /// disabled. A detection moves the session to [`Phase::Aborted`].
    fn checkpoint(&mut self, leg: Leg) -> Result<Option<SecurityReport>> {
        let idx = match leg {
            Leg::Distribution => 0,
            Leg::Return => 1,
        };
        if self.passed[idx] || self.reports[idx].is_some() {
            return Err(Error::Checkpoint("checkpoint already run"));
        }
        let (mut tx, plan) = self
            .in_flight
            .take()
            .ok_or(Error::Checkpoint("no transmission awaiting a checkpoint"))?;
        if !self.security() {
            self.passed[idx] = true;
            return Ok(None);
        }
        let decoys = run_eavesdropping_detection(&mut self.lab, &mut tx, &plan)?;
        let k = self.config.security.validate_k;
        let validation = run_entanglement_validation(&mut self.lab, &self.validation[idx], k)?;
        let report = decoys.merge(&validation);
        self.reports[idx] = Some(report);
        self.transcript.push(Event::Checkpoint { leg, report });
        if report.detected {
            self.phase = Phase::Aborted;
            self.transcript.push(Event::Aborted { leg });
        } else {
            self.passed[idx] = true;
        }
        Ok(Some(report))
    }

    /// Decoy test on the distribution leg and validation of the first set.
    pub fn checkpoint_distribution(&mut self) -> Result<Option<SecurityReport>> {
        self.expect_phase("checkpoint_distribution", Phase::Distributed)?;
        self.checkpoint(Leg::Distribution)
    }

    pub fn embed_secret(&mut self) -> Result<()> {
        self.expect_phase("embed_secret", Phase::Distributed)?;
        if self.security() && !self.passed[0] {
            return Err(Error::Checkpoint("distribution checkpoint has not passed"));
        }
        let mode = self.config.oracle_mode;
        let ancilla = |s: &Self, name: &str| s.layout.get(name).ok().map(|q| q[0]);
        match self.secrets.clone() {
            Secrets::TwoParty { s } => {
                let (ar, aq) = (self.reg("AR"), ancilla(self, "AQ"));
                self.lab.phase_oracle(&ar, &s, mode, aq)?;
            }
            Secrets::ThreeParty { s_b, s_c } => {
                let (br, bq) = (self.reg("BR"), ancilla(self, "BQ"));
                self.lab.phase_oracle(&br, &s_b, mode, bq)?;
                let (cr, cq) = (self.reg("CR"), ancilla(self, "CQ"));
                self.lab.phase_oracle(&cr, &s_c, mode, cq)?;
            }
        }
        self.phase = Phase::Embedded;
        self.transcript.push(Event::Embedded { oracle_mode: mode });
        Ok(())
    }

    /// Sends the encoded register(s) and the second validation set to the
    /// decoding party.
    pub fn transmit(&mut self) -> Result<()> {
        self.expect_phase("transmit", Phase::Embedded)?;
        let (sources, parties): (&[&str], &[usize]) = match self.config.variant {
            Variant::TwoParty => (&["AR"], &[0]),
            Variant::ThreeParty => (&["BR", "CR"], &[1, 2]),
        };
        let payloads = sources
            .iter()
            .zip(parties)
            .map(|(name, &party)| {
                let mut p: Vec<(Qid, SlotKind)> = self
                    .reg(name)
                    .into_iter()
                    .enumerate()
                    .map(|(index, q)| (q, SlotKind::Data { index }))
                    .collect();
                for (tuple, t) in self.validation[1].iter().enumerate() {
                    p.push((t[party], SlotKind::Validation { set: 1, tuple }));
                }
                p
            })
            .collect();
        let (decoys, intercepted) = self.send(Leg::Return, payloads)?;
        self.phase = Phase::Transmitted;
        self.transcript.push(Event::Transmitted {
            decoys,
            intercepted,
        });
        Ok(())
    }

    /// Decoy test on the return leg and validation of the second set.
    pub fn checkpoint_return(&mut self) -> Result<Option<SecurityReport>> {
        self.expect_phase("checkpoint_return", Phase::Transmitted)?;
        self.checkpoint(Leg::Return)
    }

    /// Registers measured in the Hadamard-entanglement check, first register
    /// first: (BR_A, BR) or (AR, AR_B, AR_C).
    fn decode_registers(&self) -> Vec<Vec<Qid>> {
        let names: &[&str] = match self.config.variant {
            Variant::TwoParty => &["BR_A", "BR"],
            Variant::ThreeParty => &["AR", "AR_B", "AR_C"],
        };
        names.iter().map(|n| self.reg(n)).collect()
    }

    /// Name of the register that holds the secret after decryption.
    pub fn output_register(&self) -> &'static str {
        match self.config.variant {
            Variant::TwoParty => "BR",
            Variant::ThreeParty => "AR_C",
        }
    }

    /// The decryption unitary without the final measurement, so the output
    /// register's distribution can be inspected.
    pub fn apply_decryption_circuit(&mut self) -> Result<()> {
        self.expect_phase("apply_decryption_circuit", Phase::Transmitted)?;
        if self.security() && !self.passed[1] {
            return Err(Error::Checkpoint("return checkpoint has not passed"));
        }
        if self.decrypted {
            return Err(Error::Checkpoint("decryption circuit already applied"));
        }
        let regs = self.decode_registers();
        let all: Vec<Qid> = regs.iter().flatten().copied().collect();
        self.lab.join(&all)?;
        for r in &regs {
            self.lab.h_all(r)?;
        }
        // Chain CNOTs register to register: 0 -> 1, then 1 -> 2 for three parties.
        for pair in regs.windows(2) {
            for (&c, &t) in pair[0].iter().zip(&pair[1]) {
                self.lab.cnot(c, t)?;
            }
        }
        self.decrypted = true;
        self.transcript.push(Event::DecryptionApplied);
        Ok(())
    }

    /// Applies the decryption circuit if needed and measures the output
    /// register. Eve measures whatever she still holds afterwards.
    pub fn decode(&mut self) -> Result<BitVector> {
        if !self.decrypted {
            self.apply_decryption_circuit()?;
        }
        let out = self.reg(self.output_register());
        let value = self.lab.measure_register(&out, Basis::Computational)?;
        self.eve.finish(&mut self.lab)?;
        self.phase = Phase::Decoded;
        self.transcript.push(Event::Decoded {
            value: value.clone(),
        });
        Ok(value)
    }

    /// Samples all decode registers after `H⊗m` on each (on a copy of the
    /// state) and checks that every shot XORs to the secret.
    pub fn verify_hadamard_entanglement(&self, shots: usize, seed: u64) -> Result<HadamardReport> {
        self.expect_phase("verify_hadamard_entanglement", Phase::Transmitted)?;
        if self.decrypted {
            return Err(Error::Checkpoint("decryption circuit already applied"));
        }
        let regs = self.decode_registers();
        let mut lab = self.lab.clone();
        for r in &regs {
            lab.h_all(r)?;
        }
        let all: Vec<Qid> = regs.iter().flatten().copied().collect();
        let samples = lab.sample(&all, shots, seed)?;
        let m = self.config.m;
        let target = self.secrets.target();
        let mut violations = 0;
        let uniform = m <= MAX_UNIFORMITY_BITS;
        let mut counts = vec![0u64; if uniform { 1 << m } else { 0 }];
        for shot in &samples {
            let parity = BitVector::from_fn(m, |j| {
                (0..regs.len()).fold(false, |acc, r| acc ^ shot.get(r * m + j))
            })?;
            if parity != target {
                violations += 1;
            }
            if uniform {
                let a = (0..m).fold(0usize, |acc, j| acc | ((shot.get(j) as usize) << j));
                counts[a] += 1;
            }
        }
        let uniformity_p = if uniform && shots > 0 {
            Some(chi_square_uniform_p(&counts)?)
        } else {
            None
        };
        Ok(HadamardReport {
            shots,
            violations,
            uniformity_p,
        })
    }

    /// Runs every phase, stopping at the first checkpoint that detects.
    pub fn run_to_completion(&mut self) -> Result<Outcome> {
        self.distribute()?;
        self.checkpoint_distribution()?;
        if self.phase == Phase::Aborted {
            return Ok(Outcome {
                decoded: None,
                aborted_at: Some(Leg::Distribution),
            });
        }
        self.embed_secret()?;
        self.transmit()?;
        self.checkpoint_return()?;
        if self.phase == Phase::Aborted {
            return Ok(Outcome {
                decoded: None,
                aborted_at: Some(Leg::Return),
            });
        }
        let decoded = self.decode()?;
        Ok(Outcome {
            decoded: Some(decoded),
            aborted_at: None,
        })
    }
}
