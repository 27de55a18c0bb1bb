fn main() {
    std::process::exit(sisdiag::cli::main_with_args(std::env::args_os()));
}
