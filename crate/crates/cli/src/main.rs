use std::process::ExitCode;

fn main() -> ExitCode {
    mlshap_cli::run(std::env::args_os())
}
