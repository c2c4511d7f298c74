use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let env_tol = std::env::var(qfactor_cli::config::TOL_ENV).ok();
    let out = qfactor_cli::run_args(std::env::args_os(), env_tol.as_deref());
    // a closed stdout (e.g. piping into `head`) is not an error worth reporting
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    ExitCode::from(out.code as u8)
}
