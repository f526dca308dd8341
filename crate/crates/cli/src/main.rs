use std::process::ExitCode;

fn main() -> ExitCode {
    formdraft_cli::main_with(std::env::args_os())
}
