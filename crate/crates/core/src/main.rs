use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use spherex::cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SPHEREX_LOG")).init();
    let cli = Cli::parse();
    let output = run(&cli);

    let json = serde_json::to_string_pretty(&output.report).expect("reports are valid JSON");
    let written = match &cli.out {
        Some(path) => fs::write(path, json + "\n").and_then(|_| match &output.csv {
            Some(csv) => fs::write(path.with_extension("csv"), csv),
            None => Ok(()),
        }),
        None => writeln!(std::io::stdout(), "{json}"),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(2);
    }
    eprintln!("{}", output.summary);
    ExitCode::from(output.exit_code as u8)
}
