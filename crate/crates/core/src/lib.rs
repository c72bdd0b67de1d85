//! Simulation and verification of no-signaling guessing games.
//!
//! * [`bitstream`]: exact infinite binary expansions with the baker's-map shift
//!   and a decidable eventual-equality test.
//! * [`oracle`]: a choice function picking one representative per class.
//! * [`game`] and [`strategy`]: the referee and the players.
//! * [`behavior`]: finite-alphabet no-signaling and functional no-signaling checks.
//! * [`experiment`]: the Monte Carlo harness with win-rate, Azuma, martingale
//!   and measure-invariance audits.

pub mod behavior;
pub mod bitstream;
pub mod experiment;
pub mod game;
pub mod oracle;
pub mod seed;
pub mod strategy;

pub use bitstream::{eventually_equal, Bit, BitStream, EquivalenceWitness};
pub use game::{GameSpec, GameVariant, Referee, TrialRecord};
pub use oracle::{class_of, ClassHandle, Oracle, OracleMode};
pub use strategy::{AccessContract, StrategySpec};
