//! `onebit-detect` binary entry point.

fn main() {
    std::process::exit(onebit_detect_cli::run(std::env::args_os()));
}
