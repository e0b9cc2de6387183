fn main() {
    std::process::exit(matweight::cli::main_with_args(std::env::args_os()));
}
