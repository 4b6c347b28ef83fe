//! Channel model, security tests and eavesdropping strategies.
//!
//! A transmission leg is a single interleaved sequence of slots, each bound
//! for one receiver ("stream"). Payload slots are interleaved round-robin
//! across streams; decoys are then inserted at a uniformly random subset of
//! positions, each decoy bound for a uniformly random stream. An adversary
//! sees the slots in order but not their roles.
//!
//! Eve's strategies:
//!
//! * measure-resend: computational-basis measurement of every slot (or a
//!   random Z/X basis per slot), forwarding the collapsed qubit;
//! * intercept-resend-fake: every slot is stored and replaced by one member
//!   of a fresh entangled tuple Eve prepared herself. With two streams the
//!   `i`-th slots of both streams receive two members of one GHZ₃ triplet;
//! * entangle-measure: a fresh ancilla per position, CNOT-coupled to the
//!   stream-0 slot, so an intact GHZ₃ position becomes GHZ₄;
//! * pns: the same coupling applied at the distribution source.
//!
//! Eve's records are the outcomes she holds at the end of the run:
//! measurement results for measure-resend, and Hadamard-basis outcomes of
//! stored originals or ancillas for the other strategies.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, Basis};
use crate::error::{Error, Result};
use crate::lab::{Lab, Qid};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    None,
    MeasureResend,
    InterceptResendFake,
    EntangleMeasure,
    Pns,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::None,
        Strategy::MeasureResend,
        Strategy::InterceptResendFake,
        Strategy::EntangleMeasure,
        Strategy::Pns,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::MeasureResend => "measure-resend",
            Strategy::InterceptResendFake => "intercept-resend-fake",
            Strategy::EntangleMeasure => "entangle-measure",
            Strategy::Pns => "pns",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown attack strategy `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Leg {
    /// Qubits sent out from the party that prepares the entangled tuples.
    Distribution,
    /// Encoded qubits sent towards the decoding party.
    #[default]
    Return,
}

impl Leg {
    pub fn name(self) -> &'static str {
        match self {
            Leg::Distribution => "distribution",
            Leg::Return => "return",
        }
    }
}

impl fmt::Display for Leg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Leg {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distribution" => Ok(Leg::Distribution),
            "return" => Ok(Leg::Return),
            _ => Err(Error::Parse(format!("unknown leg `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackConfig {
    pub strategy: Strategy,
    pub leg: Leg,
    /// Measure-resend only: pick Z or X uniformly per slot instead of always Z.
    pub random_basis: bool,
}

impl AttackConfig {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(strategy: Strategy, leg: Leg) -> Self {
        Self {
            strategy,
            leg,
            random_basis: false,
        }
    }

    /// Only measure-resend and intercept-resend-fake are defined on the
    /// distribution leg; every strategy is defined on the return leg.
    pub fn validate(&self) -> Result<()> {
        let allowed = match self.leg {
            Leg::Distribution => matches!(
                self.strategy,
                Strategy::None | Strategy::MeasureResend | Strategy::InterceptResendFake
            ),
            Leg::Return => true,
        };
        if !allowed {
            return Err(Error::Config {
                field: "attack".into(),
                message: format!(
                    "strategy {} is not defined on the {} leg",
                    self.strategy, self.leg
                ),
            });
        }
        if self.random_basis && self.strategy != Strategy::MeasureResend {
            return Err(Error::Config {
                field: "attack.random_basis".into(),
                message: "random basis only applies to measure-resend".into(),
            });
        }
        Ok(())
    }

    /// The leg on which Eve physically acts. PNS taps the source, so it acts
    /// on the distribution leg whatever leg is configured.
    pub fn acting_leg(&self) -> Option<Leg> {
        match self.strategy {
            Strategy::None => None,
            Strategy::Pns => Some(Leg::Distribution),
            _ => Some(self.leg),
        }
    }
}

/// One of the four single-qubit decoy preparations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoyState {
    Zero,
    One,
    Plus,
    Minus,
}

impl DecoyState {
    pub const ALL: [DecoyState; 4] = [
        DecoyState::Zero,
        DecoyState::One,
        DecoyState::Plus,
        DecoyState::Minus,
    ];

    pub fn basis(self) -> Basis {
        match self {
            DecoyState::Zero | DecoyState::One => Basis::Computational,
            DecoyState::Plus | DecoyState::Minus => Basis::Hadamard,
        }
    }

    /// Outcome of an undisturbed measurement in [`DecoyState::basis`].
    pub fn bit(self) -> bool {
        matches!(self, DecoyState::One | DecoyState::Minus)
    }

    fn prepare<B: Backend>(self, lab: &mut Lab<B>, q: Qid) -> Result<()> {
        if self.bit() {
            lab.x(q)?;
        }
        if self.basis() == Basis::Hadamard {
            lab.h(q)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SlotKind {
    /// Position `index` of a data register.
    Data { index: usize },
    /// Member of sacrificial tuple `tuple` in validation set `set`.
    Validation { set: usize, tuple: usize },
    Decoy { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub qid: Qid,
    pub stream: usize,
    pub kind: SlotKind,
}

/// The ordered qubit sequence of one leg.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transmission {
    pub streams: usize,
    pub slots: Vec<Slot>,
}

impl Transmission {
    /// Interleaves per-stream payloads round-robin.
    pub fn interleave(payloads: Vec<Vec<(Qid, SlotKind)>>) -> Self {
        let streams = payloads.len();
        let longest = payloads.iter().map(Vec::len).max().unwrap_or(0);
        let mut slots = Vec::with_capacity(payloads.iter().map(Vec::len).sum());
        for i in 0..longest {
            for (stream, payload) in payloads.iter().enumerate() {
                if let Some(&(qid, kind)) = payload.get(i) {
                    slots.push(Slot { qid, stream, kind });
                }
            }
        }
        Self { streams, slots }
    }

    /// Slots bound for `stream`, in arrival order, as indices into `slots`.
    pub fn stream_indices(&self, stream: usize) -> Vec<usize> {
        (0..self.slots.len())
            .filter(|&i| self.slots[i].stream == stream)
            .collect()
    }

    pub fn decoy_count(&self) -> usize {
        self.slots
            .iter()
            .filter(|s| matches!(s.kind, SlotKind::Decoy { .. }))
            .count()
    }
}

/// Where decoys go, how they are prepared, and which receiver checks them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoyPlan {
    /// Ascending positions in the final sequence.
    pub positions: Vec<usize>,
    pub states: Vec<DecoyState>,
    pub streams: Vec<usize>,
}

impl DecoyPlan {
    pub fn empty() -> Self {
        Self {
            positions: Vec::new(),
            states: Vec::new(),
            streams: Vec::new(),
        }
    }

    /// `d` decoys at a uniformly random `d`-subset of the `payload + d`
    /// positions, with uniform preparations and receivers.
    pub fn random(d: usize, payload: usize, streams: usize, rng: &mut SimRng) -> Self {
        let mut positions = sample(rng, payload + d, d).into_vec();
        positions.sort_unstable();
        let states = (0..d)
            .map(|_| DecoyState::ALL[rng.gen_range(0..4)])
            .collect();
        let streams = (0..d).map(|_| rng.gen_range(0..streams.max(1))).collect();
        Self {
            positions,
            states,
            streams,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Prepares the plan's decoys as fresh single-qubit systems and splices
/// them into the sequence.
pub fn insert_decoys<B: Backend>(
    lab: &mut Lab<B>,
    tx: &mut Transmission,
    plan: &DecoyPlan,
) -> Result<()> {
    let d = plan.len();
    if plan.states.len() != d || plan.streams.len() != d {
        return Err(Error::Dimension {
            expected: d,
            found: plan.states.len().min(plan.streams.len()),
        });
    }
    let total = tx.slots.len() + d;
    if plan.positions.iter().any(|&p| p >= total)
        || plan.positions.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::Argument(
            "decoy positions must be ascending and inside the sequence".into(),
        ));
    }
    if plan.streams.iter().any(|&s| s >= tx.streams) {
        return Err(Error::Argument("decoy bound for a nonexistent stream".into()));
    }
    let mut payload = std::mem::take(&mut tx.slots).into_iter();
    let mut next_decoy = 0;
    let mut slots = Vec::with_capacity(total);
    for pos in 0..total {
        if plan.positions.get(next_decoy) == Some(&pos) {
            let q = lab.create(1)?[0];
            plan.states[next_decoy].prepare(lab, q)?;
            slots.push(Slot {
                qid: q,
                stream: plan.streams[next_decoy],
                kind: SlotKind::Decoy { index: next_decoy },
            });
            next_decoy += 1;
        } else {
            slots.push(payload.next().expect("payload slot"));
        }
    }
    tx.slots = slots;
    Ok(())
}

/// Outcome of the security tests at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecurityReport {
    pub decoys_checked: usize,
    pub decoy_mismatches: usize,
    pub tuples_checked: usize,
    pub parity_failures: usize,
    pub detected: bool,
}

impl SecurityReport {
    fn from_counts(decoys: usize, mismatches: usize, tuples: usize, failures: usize) -> Self {
        Self {
            decoys_checked: decoys,
            decoy_mismatches: mismatches,
            tuples_checked: tuples,
            parity_failures: failures,
            detected: mismatches + failures > 0,
        }
    }

    pub fn decoy_detected(&self) -> bool {
        self.decoy_mismatches > 0
    }

    pub fn validation_detected(&self) -> bool {
        self.parity_failures > 0
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self::from_counts(
            self.decoys_checked + other.decoys_checked,
            self.decoy_mismatches + other.decoy_mismatches,
            self.tuples_checked + other.tuples_checked,
            self.parity_failures + other.parity_failures,
        )
    }
}

/// Receivers measure each decoy in its preparation basis and compare with
/// the disclosed preparation. Decoys are removed from the sequence.
pub fn run_eavesdropping_detection<B: Backend>(
    lab: &mut Lab<B>,
    tx: &mut Transmission,
    plan: &DecoyPlan,
) -> Result<SecurityReport> {
    let mut mismatches = 0;
    let mut checked = 0;
    for slot in &tx.slots {
        if let SlotKind::Decoy { index } = slot.kind {
            let state = plan.states.get(index).ok_or_else(|| {
                Error::Argument(format!("decoy {index} is not in the plan"))
            })?;
            if lab.measure_in(slot.qid, state.basis())? != state.bit() {
                mismatches += 1;
            }
            checked += 1;
        }
    }
    if checked != plan.len() {
        return Err(Error::Dimension {
            expected: plan.len(),
            found: checked,
        });
    }
    tx.slots.retain(|s| !matches!(s.kind, SlotKind::Decoy { .. }));
    Ok(SecurityReport::from_counts(checked, mismatches, 0, 0))
}

/// Measures the first `k` tuples in the Hadamard basis and checks that each
/// tuple's outcomes have even parity.
pub fn run_entanglement_validation<B: Backend>(
    lab: &mut Lab<B>,
    tuples: &[Vec<Qid>],
    k: usize,
) -> Result<SecurityReport> {
    if k > tuples.len() {
        return Err(Error::Argument(format!(
            "{k} validation tuples requested but only {} reserved",
            tuples.len()
        )));
    }
    let mut failures = 0;
    for tuple in &tuples[..k] {
        let mut parity = false;
        for &q in tuple {
            parity ^= lab.measure_in(q, Basis::Hadamard)?;
        }
        if parity {
            failures += 1;
        }
    }
    Ok(SecurityReport::from_counts(0, 0, k, failures))
}

/// What Eve holds: results she already has and qubits she will measure.
#[derive(Debug, Clone, Default)]
pub struct EveState {
    records: Vec<(SlotKind, bool)>,
    /// Intercepted originals or coupled ancillas, measured in the Hadamard
    /// basis by [`EveState::finish`].
    held: Vec<(SlotKind, Qid)>,
    /// Eve's halves of her own fake tuples; never measured.
    kept: Vec<Qid>,
    finished: bool,
}

impl EveState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn finish<B: Backend>(&mut self, lab: &mut Lab<B>) -> Result<()> {
        if self.finished {
            return Ok(());
        }
        for &(kind, q) in &self.held {
            let bit = lab.measure_in(q, Basis::Hadamard)?;
            self.records.push((kind, bit));
        }
        self.finished = true;
        Ok(())
    }

    pub fn records(&self) -> &[(SlotKind, bool)] {
        &self.records
    }

    /// Recorded bits attached to data slots, in recording order.
    pub fn data_bits(&self) -> Vec<bool> {
        self.records
            .iter()
            .filter(|(k, _)| matches!(k, SlotKind::Data { .. }))
            .map(|&(_, b)| b)
            .collect()
    }

    pub fn kept(&self) -> &[Qid] {
        &self.kept
    }

    pub fn held(&self) -> &[(SlotKind, Qid)] {
        &self.held
    }
}

pub fn attack_measure_resend<B: Backend>(
    lab: &mut Lab<B>,
    tx: &mut Transmission,
    eve: &mut EveState,
    random_basis: bool,
    rng: &mut SimRng,
) -> Result<()> {
    for slot in &tx.slots {
        let basis = if random_basis && rng.gen::<bool>() {
            Basis::Hadamard
        } else {
            Basis::Computational
        };
        let bit = lab.measure_in(slot.qid, basis)?;
        eve.records.push((slot.kind, bit));
    }
    Ok(())
}

/// Pairs the `i`-th stream-0 slot with the `i`-th stream-1 slot; slots
/// without a partner form groups of one.
fn position_groups(tx: &Transmission) -> Vec<Vec<usize>> {
    let per_stream: Vec<Vec<usize>> = (0..tx.streams).map(|s| tx.stream_indices(s)).collect();
    let longest = per_stream.iter().map(Vec::len).max().unwrap_or(0);
    (0..longest)
        .map(|i| per_stream.iter().filter_map(|s| s.get(i).copied()).collect())
        .collect()
}

pub fn attack_intercept_fake<B: Backend>(
    lab: &mut Lab<B>,
    tx: &mut Transmission,
    eve: &mut EveState,
) -> Result<()> {
    let arity = tx.streams + 1;
    for group in position_groups(tx) {
        let tuple = lab.create(arity)?;
        lab.h(tuple[0])?;
        for &q in &tuple[1..] {
            lab.cnot(tuple[0], q)?;
        }
        eve.kept.push(tuple[0]);
        let mut forward = tuple[1..].iter();
        for &i in &group {
            let slot = &mut tx.slots[i];
            eve.held.push((slot.kind, slot.qid));
            slot.qid = *forward.next().expect("tuple member");
        }
        eve.kept.extend(forward);
    }
    Ok(())
}

/// Couples one fresh ancilla per position group to the group's first slot.
pub fn attack_entangle_measure<B: Backend>(
    lab: &mut Lab<B>,
    tx: &mut Transmission,
    eve: &mut EveState,
) -> Result<()> {
    let anchors: Vec<Slot> = position_groups(tx)
        .into_iter()
        .map(|g| tx.slots[g[0]])
        .collect();
    // Allocate per host system in one step so each system grows only once.
    let mut by_system: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, slot) in anchors.iter().enumerate() {
        by_system.entry(lab.system_of(slot.qid)?).or_default().push(i);
    }
    let mut coupled = Vec::with_capacity(anchors.len());
    for members in by_system.values() {
        let ancillas = lab.extend(anchors[members[0]].qid, members.len())?;
        for (&i, &a) in members.iter().zip(&ancillas) {
            lab.cnot(anchors[i].qid, a)?;
            coupled.push((i, a));
        }
    }
    coupled.sort_unstable();
    eve.held
        .extend(coupled.into_iter().map(|(i, a)| (anchors[i].kind, a)));
    Ok(())
}

/// Photon-number splitting, modelled as an extra correlated qubit per
/// emitted position retained by Eve. Applied to the distribution leg.
pub fn attack_pns<B: Backend>(
    lab: &mut Lab<B>,
    tx: &mut Transmission,
    eve: &mut EveState,
) -> Result<()> {
    attack_entangle_measure(lab, tx, eve)
}

/// Runs `config`'s strategy on `tx` if it acts on `leg`.
pub fn intercept<B: Backend>(
    lab: &mut Lab<B>,
    tx: &mut Transmission,
    leg: Leg,
    config: &AttackConfig,
    eve: &mut EveState,
    rng: &mut SimRng,
) -> Result<bool> {
    if config.acting_leg() != Some(leg) {
        return Ok(false);
    }
    match config.strategy {
        Strategy::None => return Ok(false),
        Strategy::MeasureResend => attack_measure_resend(lab, tx, eve, config.random_basis, rng)?,
        Strategy::InterceptResendFake => attack_intercept_fake(lab, tx, eve)?,
        Strategy::EntangleMeasure => attack_entangle_measure(lab, tx, eve)?,
        Strategy::Pns => attack_pns(lab, tx, eve)?,
    }
    Ok(true)
}
