fn main() {
    std::process::exit(evidential_ood::cli::main_with_args(std::env::args_os()));
}
