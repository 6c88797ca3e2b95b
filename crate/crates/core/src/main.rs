use std::process::ExitCode;

fn main() -> ExitCode {
    // FSK_THREADS caps worker parallelism; 0 or unset means automatic
    if let Ok(raw) = std::env::var("FSK_THREADS") {
        match raw.parse::<usize>() {
            Ok(0) => {}
            Ok(n) => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: could not configure {n} worker threads: {e}");
                    return ExitCode::from(2);
                }
            }
            Err(_) => {
                eprintln!("error: FSK_THREADS must be a non-negative integer, got `{raw}`");
                return ExitCode::from(2);
            }
        }
    }
    ExitCode::from(fsk::cli::run_cli(std::env::args()) as u8)
}
