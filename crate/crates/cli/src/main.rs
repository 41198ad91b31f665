use std::io::Write;

fn main() {
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr().lock();
    let threads = std::env::var(rotkey_cli::THREADS_ENV).ok();
    if let Err(e) = rotkey_cli::configure_threads(threads.as_deref()) {
        let _ = writeln!(stderr, "error: {e}");
        std::process::exit(e.exit_code());
    }
    let code = rotkey_cli::run(std::env::args_os(), &mut stdout, &mut stderr);
    let _ = stdout.flush();
    std::process::exit(code);
}
