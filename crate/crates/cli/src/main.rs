//! `nosig`: run guessing-game experiments and check behaviors from the command line.
//!
//! Exit codes: 0 success, 1 bad input or configuration, 2 signaling trials
//! were quarantined (`simulate`), 3 the behavior signals (`verify-behavior`).

mod behavior;
mod invariance;
mod output;
mod simulate;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "nosig", version, about = "No-signaling guessing games: simulation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Play repeated games and report win rates and the Azuma audit.
    Simulate(Box<simulate::SimulateArgs>),
    /// Check a behavior file for normalization, no-signaling and FNS.
    VerifyBehavior(behavior::VerifyArgs),
    /// Chi-square test of the baker's map on uniform roots.
    InvarianceTest(invariance::InvarianceArgs),
    /// Count FNS function tuples and compare them with the factored ones.
    EnumerateFns(behavior::EnumerateArgs),
}

const EXIT_CONFIG: u8 = 1;
const EXIT_SIGNALING_TRIALS: u8 = 2;
const EXIT_NS_VIOLATION: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_CONFIG),
            };
        }
    };
    let result = match &cli.command {
        Command::Simulate(args) => simulate::run(args).map(|invalid| {
            if invalid > 0 {
                eprintln!("{invalid} trials quarantined as signaling");
                EXIT_SIGNALING_TRIALS
            } else {
                0
            }
        }),
        Command::VerifyBehavior(args) => behavior::verify(args).map(|ns| if ns { 0 } else { EXIT_NS_VIOLATION }),
        Command::InvarianceTest(args) => invariance::run(args).map(|()| 0),
        Command::EnumerateFns(args) => behavior::enumerate(args).map(|equal| {
            if !equal {
                eprintln!("FNS tuples differ from the factored tuples");
            }
            if equal { 0 } else { EXIT_CONFIG }
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
