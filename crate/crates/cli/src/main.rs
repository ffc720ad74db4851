fn main() {
    std::process::exit(faquad_cli::cli::main_with_args(std::env::args_os()));
}
