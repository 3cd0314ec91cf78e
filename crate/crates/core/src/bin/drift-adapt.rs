fn main() {
    std::process::exit(drift_adapt::cli::run(std::env::args_os()));
}
