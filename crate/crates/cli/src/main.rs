use std::process::ExitCode;

fn main() -> ExitCode {
    occulab::main_with_args(std::env::args_os())
}
