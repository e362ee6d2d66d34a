use std::process::ExitCode;

fn main() -> ExitCode {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let code = mtss::cli::run(std::env::args_os(), &mut stdin.lock(), &mut stdout.lock());
    ExitCode::from(code)
}
