use std::process::ExitCode;

fn main() -> ExitCode {
    chainstitch::cli::run()
}
