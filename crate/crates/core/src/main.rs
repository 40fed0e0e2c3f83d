fn main() {
    std::process::exit(qmoments::cli::main_with_args(std::env::args_os()));
}
