use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = potensor::cli::configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let code = potensor::cli::run_from(std::env::args_os());
    ExitCode::from(code as u8)
}
