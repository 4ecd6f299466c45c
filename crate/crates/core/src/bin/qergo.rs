fn main() {
    std::process::exit(qergo::cli::main_with_args(std::env::args_os()));
}
