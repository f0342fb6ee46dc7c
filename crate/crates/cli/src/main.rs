use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(spinbatt::main_with_args(std::env::args_os()))
}
