fn main() {
    std::process::exit(krylov_ensemble_cli::run(std::env::args_os()));
}
