fn main() {
    std::process::exit(xlproject::cli::main_with_args(std::env::args_os()));
}
