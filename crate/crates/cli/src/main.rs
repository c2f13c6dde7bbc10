fn main() {
    std::process::exit(mcissa_cli::main_with_args(std::env::args_os()));
}
