//! Simulation of two- and three-party quantum secure direct communication
//! over dense state-vector and stabilizer-tableau backends, with decoy and
//! entanglement-validation tests and four eavesdropping strategies.
//!
//! ```
//! use qsdc::{ProtocolSession, Secrets, SessionConfig, StabilizerTableau, Variant};
//!
//! let s: qsdc::BitVector = "1011".parse().unwrap();
//! let config = SessionConfig::new(Variant::TwoParty, 4);
//! let mut session =
//!     ProtocolSession::<StabilizerTableau>::new(config, Secrets::TwoParty { s: s.clone() }, 7)
//!         .unwrap();
//! let outcome = session.run_to_completion().unwrap();
//! assert_eq!(outcome.decoded, Some(s));
//! ```

pub mod adversary;
pub mod backend;
pub mod bitvec;
pub mod error;
pub mod lab;
pub mod protocol;
pub mod rng;
pub mod runner;
pub mod stabilizer;
pub mod stats;
pub mod statevector;

pub use adversary::{AttackConfig, Leg, SecurityReport, Strategy};
pub use backend::{Backend, BackendKind, Basis, Limits, OracleMode, RegisterLayout};
pub use bitvec::BitVector;
pub use error::{Error, Result};
pub use lab::{Lab, Qid};
pub use protocol::{Phase, ProtocolSession, Secrets, SecurityConfig, SessionConfig, Variant};
pub use runner::{run, RunConfig, RunReport};
pub use stabilizer::StabilizerTableau;
pub use statevector::DenseState;
