use std::process::ExitCode;

fn main() -> ExitCode {
    conductlab::cli::run()
}
