fn main() {
    std::process::exit(nbk::cli::main_with_args(std::env::args_os()));
}
