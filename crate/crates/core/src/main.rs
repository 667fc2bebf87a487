use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("ORACLEVEC_LOG", "error"),
    )
    .init();
    ExitCode::from(oraclevec::cli::run(std::env::args()) as u8)
}
