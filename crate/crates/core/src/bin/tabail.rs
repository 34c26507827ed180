fn main() {
    std::process::exit(tabail::cli::main_with_args(std::env::args_os()));
}
