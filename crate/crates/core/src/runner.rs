//! Batch experiments: run configuration, trial execution, JSON reports and
//! CSV sweeps.
//!
//! Trial `t` of a run with seed `S` uses the seed `derive_path(S, [t])` for
//! its secrets, protocol choices, measurements and adversary, so reports do
//! not depend on how trials are scheduled. Reports contain no timing unless
//! requested, which keeps them byte-identical across invocations.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{AttackConfig, Leg, SecurityReport, Strategy};
use crate::backend::{Backend, BackendKind, Limits, OracleMode, DEFAULT_DENSE_QUBIT_CAP};
use crate::bitvec::BitVector;
use crate::error::{Error, Result};
use crate::protocol::{Event, ProtocolSession, Secrets, SecurityConfig, SessionConfig, Variant};
use crate::rng::{derive_path, derive_seed, purpose, sim_rng};
use crate::stabilizer::StabilizerTableau;
use crate::statevector::DenseState;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub variant: Variant,
    pub m: usize,
    /// Two-party secret; random per trial when absent.
    pub secret: Option<BitVector>,
    /// Three-party secrets; each random per trial when absent.
    pub secret_b: Option<BitVector>,
    pub secret_c: Option<BitVector>,
    pub backend: BackendKind,
    pub trials: usize,
    pub attack: AttackConfig,
    /// Decoy and validation tests; off gives checkpoints that always pass.
    pub security: bool,
    /// Decoys per leg; defaults to `⌈m/4⌉`.
    pub decoys: Option<usize>,
    /// Validation tuples per checkpoint; defaults to `⌈m/4⌉`.
    pub validate_k: Option<usize>,
    pub seed: u64,
    pub oracle_mode: OracleMode,
    pub dense_cap: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: Variant::TwoParty,
            m: 8,
            secret: None,
            secret_b: None,
            secret_c: None,
            backend: BackendKind::Stabilizer,
            trials: 1,
            attack: AttackConfig::none(),
            security: true,
            decoys: None,
            validate_k: None,
            seed: 0,
            oracle_mode: OracleMode::Circuit,
            dense_cap: DEFAULT_DENSE_QUBIT_CAP,
        }
    }
}

fn config_error(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(config_error("m", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(config_error("trials", "must be at least 1"));
        }
        let secrets: [(&str, &Option<BitVector>, Variant); 3] = [
            ("secret", &self.secret, Variant::TwoParty),
            ("secret_b", &self.secret_b, Variant::ThreeParty),
            ("secret_c", &self.secret_c, Variant::ThreeParty),
        ];
        for (field, value, variant) in secrets {
            if let Some(v) = value {
                if variant != self.variant {
                    return Err(config_error(
                        field,
                        format!("only applies to the {variant} variant"),
                    ));
                }
                if v.len() != self.m {
                    return Err(config_error(
                        field,
                        format!("has {} bits but m = {}", v.len(), self.m),
                    ));
                }
            }
        }
        self.attack.validate()?;
        if !self.security && (self.decoys.is_some() || self.validate_k.is_some()) {
            return Err(config_error(
                "security",
                "decoys and validate_k require security checks",
            ));
        }
        if self.backend == BackendKind::Dense {
            let need = self.variant.data_qubits(self.m, self.oracle_mode);
            if need > self.dense_cap {
                return Err(config_error(
                    "m",
                    format!(
                        "dense {} run at m = {} needs {need} qubits, over the cap of {}",
                        self.variant, self.m, self.dense_cap
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn security_config(&self) -> SecurityConfig {
        if !self.security {
            return SecurityConfig::disabled();
        }
        let default = SecurityConfig::default_for(self.m);
        SecurityConfig {
            enabled: true,
            decoys: self.decoys.unwrap_or(default.decoys),
            validate_k: self.validate_k.unwrap_or(default.validate_k),
        }
    }

    /// The configuration with every default made explicit.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        if c.security {
            let s = self.security_config();
            c.decoys = Some(s.decoys);
            c.validate_k = Some(s.validate_k);
        }
        c
    }

    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            variant: self.variant,
            m: self.m,
            oracle_mode: self.oracle_mode,
            security: self.security_config(),
            attack: self.attack,
            limits: Limits {
                dense_qubit_cap: self.dense_cap,
            },
        }
    }

    /// Parses a JSON configuration; errors carry the line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config {
            field: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// The value the decoder should obtain.
    pub secret: BitVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secret_b: Option<BitVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secret_c: Option<BitVector>,
    pub decoded: Option<BitVector>,
    pub correct: bool,
    pub aborted_at: Option<Leg>,
    pub distribution_check: Option<SecurityReport>,
    pub return_check: Option<SecurityReport>,
    pub eavesdrop_detected: bool,
    pub validation_detected: bool,
    pub detected: bool,
    /// Eve's recorded bits on data positions, when she acted.
    pub eve_record: Option<BitVector>,
    pub transcript: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointAggregate {
    /// Trials that ran this checkpoint with security enabled.
    pub reached: usize,
    pub decoy_detection_rate: f64,
    pub validation_detection_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aggregates {
    pub trials: usize,
    pub decode_success_rate: f64,
    pub abort_rate: f64,
    pub eavesdrop_detection_rate: f64,
    pub validation_detection_rate: f64,
    pub detection_rate: f64,
    pub distribution_checkpoint: CheckpointAggregate,
    pub return_checkpoint: CheckpointAggregate,
}

fn rate(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

impl Aggregates {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let n = records.len();
        let count = |f: &dyn Fn(&TrialRecord) -> bool| records.iter().filter(|r| f(r)).count();
        let checkpoint = |get: &dyn Fn(&TrialRecord) -> Option<SecurityReport>| {
            let reports: Vec<SecurityReport> = records.iter().filter_map(get).collect();
            CheckpointAggregate {
                reached: reports.len(),
                decoy_detection_rate: rate(
                    reports.iter().filter(|r| r.decoy_detected()).count(),
                    reports.len(),
                ),
                validation_detection_rate: rate(
                    reports.iter().filter(|r| r.validation_detected()).count(),
                    reports.len(),
                ),
            }
        };
        Self {
            trials: n,
            decode_success_rate: rate(count(&|r| r.correct), n),
            abort_rate: rate(count(&|r| r.aborted_at.is_some()), n),
            eavesdrop_detection_rate: rate(count(&|r| r.eavesdrop_detected), n),
            validation_detection_rate: rate(count(&|r| r.validation_detected), n),
            detection_rate: rate(count(&|r| r.detected), n),
            distribution_checkpoint: checkpoint(&|r| r.distribution_check),
            return_checkpoint: checkpoint(&|r| r.return_check),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: RunConfig,
    pub aggregates: Aggregates,
    pub trials: Vec<TrialRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Internal-consistency failures: with no adversary every trial must
    /// decode correctly and no test may detect.
    pub fn invariant_violations(&self) -> Vec<String> {
        if self.config.attack.strategy != Strategy::None {
            return Vec::new();
        }
        self.trials
            .iter()
            .filter_map(|t| {
                if t.detected {
                    Some(format!("trial {}: security test fired without an adversary", t.trial))
                } else if !t.correct {
                    Some(format!("trial {}: decoded value differs from the secret", t.trial))
                } else {
                    None
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Include wall-clock time in the report.
    pub timing: bool,
}

pub fn run(config: &RunConfig) -> Result<RunReport> {
    run_with(config, RunOptions::default())
}

pub fn run_with(config: &RunConfig, options: RunOptions) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let trials = match config.backend {
        BackendKind::Dense => run_trials::<DenseState>(config)?,
        BackendKind::Stabilizer => run_trials::<StabilizerTableau>(config)?,
    };
    let aggregates = Aggregates::from_records(&trials);
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        config: config.resolved(),
        aggregates,
        trials,
        wall_time_secs: options.timing.then(|| start.elapsed().as_secs_f64()),
    })
}

fn run_trials<B: Backend>(config: &RunConfig) -> Result<Vec<TrialRecord>> {
    (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial::<B>(config, t))
        .collect()
}

fn trial_secrets(config: &RunConfig, seed: u64) -> Result<Secrets> {
    let mut rng = sim_rng(derive_seed(seed, purpose::SECRET));
    let mut pick = |given: &Option<BitVector>| -> Result<BitVector> {
        // Draw even when given, so other secrets do not shift.
        let drawn = BitVector::random(config.m, &mut rng)?;
        Ok(given.clone().unwrap_or(drawn))
    };
    Ok(match config.variant {
        Variant::TwoParty => Secrets::TwoParty {
            s: pick(&config.secret)?,
        },
        Variant::ThreeParty => Secrets::ThreeParty {
            s_b: pick(&config.secret_b)?,
            s_c: pick(&config.secret_c)?,
        },
    })
}

/// Runs trial `index` of `config` on backend `B`.
pub fn run_trial<B: Backend>(config: &RunConfig, index: usize) -> Result<TrialRecord> {
    let seed = derive_path(config.seed, &[index as u64]);
    let secrets = trial_secrets(config, seed)?;
    let mut session = ProtocolSession::<B>::new(config.session_config(), secrets.clone(), seed)?;
    let outcome = session.run_to_completion()?;
    let [distribution_check, return_check] = session.reports();
    let reports = [distribution_check, return_check];
    let any = |f: fn(&SecurityReport) -> bool| reports.iter().flatten().any(f);
    let target = secrets.target();
    let (secret_b, secret_c) = match &secrets {
        Secrets::ThreeParty { s_b, s_c } => (Some(s_b.clone()), Some(s_c.clone())),
        Secrets::TwoParty { .. } => (None, None),
    };
    let eve_bits = session.eve().data_bits();
    let eve_record = if config.attack.strategy == Strategy::None || eve_bits.is_empty() {
        None
    } else {
        Some(BitVector::from_bits(&eve_bits)?)
    };
    Ok(TrialRecord {
        trial: index,
        seed,
        correct: outcome.decoded.as_ref() == Some(&target),
        secret: target,
        secret_b,
        secret_c,
        decoded: outcome.decoded,
        aborted_at: outcome.aborted_at,
        distribution_check,
        return_check,
        eavesdrop_detected: any(SecurityReport::decoy_detected),
        validation_detected: any(SecurityReport::validation_detected),
        detected: any(|r| r.detected),
        eve_record,
        transcript: session.transcript().to_vec(),
    })
}

/// Parameter grid: `base` with every combination of the listed axis values.
/// An absent axis keeps the base value; an empty list yields no cells.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grid {
    pub base: RunConfig,
    pub variant: Option<Vec<Variant>>,
    pub backend: Option<Vec<BackendKind>>,
    pub m: Option<Vec<usize>>,
    pub strategy: Option<Vec<Strategy>>,
    pub leg: Option<Vec<Leg>>,
    pub decoys: Option<Vec<usize>>,
    pub validate_k: Option<Vec<usize>>,
}

fn axis<T: Clone>(values: &Option<Vec<T>>, base: T) -> Vec<T> {
    values.clone().unwrap_or_else(|| vec![base])
}

impl Grid {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config {
            field: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })
    }

    /// Cells in axis order variant, backend, m, strategy, leg, decoys,
    /// validate_k, the last varying fastest.
    pub fn cells(&self) -> Vec<RunConfig> {
        let b = &self.base;
        let optional = |values: &Option<Vec<usize>>, base: Option<usize>| match values {
            Some(v) => v.iter().copied().map(Some).collect(),
            None => vec![base],
        };
        let decoys = optional(&self.decoys, b.decoys);
        let validate_k = optional(&self.validate_k, b.validate_k);
        let mut cells = Vec::new();
        for &variant in &axis(&self.variant, b.variant) {
            for &backend in &axis(&self.backend, b.backend) {
                for &m in &axis(&self.m, b.m) {
                    for &strategy in &axis(&self.strategy, b.attack.strategy) {
                        for &leg in &axis(&self.leg, b.attack.leg) {
                            for &d in &decoys {
                                for &k in &validate_k {
                                    let mut c = b.clone();
                                    c.variant = variant;
                                    c.backend = backend;
                                    c.m = m;
                                    c.attack.strategy = strategy;
                                    c.attack.leg = leg;
                                    c.decoys = d;
                                    c.validate_k = k;
                                    cells.push(c);
                                }
                            }
                        }
                    }
                }
            }
        }
        cells
    }
}

/// One CSV row of a sweep. Rate columns are empty for failed cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variant: Variant,
    pub backend: BackendKind,
    pub m: usize,
    pub strategy: Strategy,
    pub leg: Leg,
    pub decoys: Option<usize>,
    pub validate_k: Option<usize>,
    pub trials: usize,
    pub status: String,
    pub decode_success_rate: Option<f64>,
    pub abort_rate: Option<f64>,
    pub eavesdrop_detection_rate: Option<f64>,
    pub validation_detection_rate: Option<f64>,
    pub detection_rate: Option<f64>,
    pub error: String,
}

pub const SWEEP_COLUMNS: [&str; 15] = [
    "variant",
    "backend",
    "m",
    "strategy",
    "leg",
    "decoys",
    "validate_k",
    "trials",
    "status",
    "decode_success_rate",
    "abort_rate",
    "eavesdrop_detection_rate",
    "validation_detection_rate",
    "detection_rate",
    "error",
];

/// Runs every cell; a failing cell is marked and the sweep continues.
pub fn sweep(grid: &Grid) -> Vec<SweepRow> {
    grid.cells()
        .iter()
        .map(|cell| {
            let resolved = cell.resolved();
            let mut row = SweepRow {
                variant: cell.variant,
                backend: cell.backend,
                m: cell.m,
                strategy: cell.attack.strategy,
                leg: cell.attack.leg,
                decoys: resolved.decoys,
                validate_k: resolved.validate_k,
                trials: cell.trials,
                status: "ok".into(),
                decode_success_rate: None,
                abort_rate: None,
                eavesdrop_detection_rate: None,
                validation_detection_rate: None,
                detection_rate: None,
                error: String::new(),
            };
            match run(cell) {
                Ok(report) => {
                    let a = report.aggregates;
                    row.decode_success_rate = Some(a.decode_success_rate);
                    row.abort_rate = Some(a.abort_rate);
                    row.eavesdrop_detection_rate = Some(a.eavesdrop_detection_rate);
                    row.validation_detection_rate = Some(a.validation_detection_rate);
                    row.detection_rate = Some(a.detection_rate);
                }
                Err(e) => {
                    row.status = "failed".into();
                    row.error = e.to_string();
                }
            }
            row
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(SWEEP_COLUMNS).map_err(io)?;
    for row in rows {
        w.serialize(row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
