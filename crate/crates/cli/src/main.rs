use std::io::Write;
use std::panic;

fn main() {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = panic::catch_unwind(|| {
        let mut out = stdout.lock();
        let mut err = stderr.lock();
        let code = mlrate_cli::run_with_args(std::env::args_os(), &mut out, &mut err);
        let _ = out.flush();
        code
    })
    .unwrap_or(mlrate_cli::EXIT_INTERNAL);
    std::process::exit(code);
}
