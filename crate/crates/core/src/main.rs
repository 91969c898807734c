fn main() {
    std::process::exit(chsolver::harness::cli::main_with_args(std::env::args_os()));
}
