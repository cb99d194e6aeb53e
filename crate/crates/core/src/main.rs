fn main() {
    std::process::exit(porousflow::cli::main_with_args(std::env::args_os()));
}
