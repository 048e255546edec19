use std::process::ExitCode;

fn main() -> ExitCode {
    skillstack::cli::main(skillstack::builtin::registry())
}
