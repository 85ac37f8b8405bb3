fn main() {
    std::process::exit(ensemble_qc_cli::run(std::env::args_os()));
}
