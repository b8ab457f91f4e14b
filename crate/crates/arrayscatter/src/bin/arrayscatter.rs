use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(arrayscatter::cli::main_with_args(std::env::args_os()))
}
