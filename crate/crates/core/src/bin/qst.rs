fn main() {
    std::process::exit(hyperqst::cli::main_with_args(std::env::args_os()));
}
