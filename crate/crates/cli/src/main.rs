use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let args: Vec<std::ffi::OsString> = std::env::args_os().collect();
    let out = cassels_cli::RunConfig::try_parse_from(&args).ok().and_then(|c| c.out);
    let o = cassels_cli::run_args(&args);
    if let Err(e) = cassels_cli::emit(out.as_deref(), &o) {
        eprintln!("cannot write output: {e}");
        return ExitCode::from(cassels_cli::EXIT_ERROR as u8);
    }
    ExitCode::from(o.code as u8)
}
