fn main() {
    std::process::exit(mrsafe::cli::main_with_args(std::env::args_os()));
}
