fn main() {
    std::process::exit(cmpc::cli::main_with_args(std::env::args_os()));
}
