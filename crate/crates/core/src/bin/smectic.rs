use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(smectic_core::cli::main())
}
