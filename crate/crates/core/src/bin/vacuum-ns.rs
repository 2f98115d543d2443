fn main() {
    std::process::exit(vacuum_ns::cli::main_with_args(std::env::args_os()));
}
