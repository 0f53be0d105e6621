use std::process::ExitCode;

fn main() -> ExitCode {
    upsum::cli::main()
}
