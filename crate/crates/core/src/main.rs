fn main() {
    std::process::exit(fracpoisson::cli::main_with_args(std::env::args_os()));
}
