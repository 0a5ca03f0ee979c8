use std::process::ExitCode;

fn main() -> ExitCode {
    navimpress_cli::main_with(std::env::args_os())
}
