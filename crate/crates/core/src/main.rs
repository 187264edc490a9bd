use std::process::ExitCode;

fn main() -> ExitCode {
    netupdate::cli::main_with_args(std::env::args_os())
}
