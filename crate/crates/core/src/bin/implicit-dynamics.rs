use std::process::ExitCode;

use clap::Parser;
use implicit_dynamics::cli::{execute, write_outputs, Flags};

fn main() -> ExitCode {
    let flags = Flags::parse();
    let result = flags.resolve().and_then(|run| {
        let outcome = execute(&run)?;
        write_outputs(&outcome, run.out.as_deref())?;
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            print!("{}", outcome.report);
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
