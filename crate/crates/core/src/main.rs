fn main() {
    std::process::exit(ula::cli::main_with_args(std::env::args_os()));
}
