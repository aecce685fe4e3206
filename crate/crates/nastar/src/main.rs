use std::io::{stderr, stdout};
use std::process::ExitCode;

fn main() -> ExitCode {
    let code = nastar::cli::run(std::env::args_os().collect(), &mut stdout().lock(), &mut stderr().lock());
    ExitCode::from(code as u8)
}
