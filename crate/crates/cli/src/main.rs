use std::process::ExitCode;

use clap::Parser;
use nlgame_cli::{run, Cli};

fn main() -> ExitCode {
    let result = run(Cli::parse()).and_then(|out| {
        out.files.commit()?;
        print!("{}", out.stdout);
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
