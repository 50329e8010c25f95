fn main() {
    std::process::exit(maglab::cli::main_with_args(std::env::args_os()));
}
