fn main() {
    std::process::exit(qcc_core::cli::main_with_args(std::env::args_os()));
}
