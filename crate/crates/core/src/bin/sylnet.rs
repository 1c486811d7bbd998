fn main() {
    std::process::exit(sylnet::cli::main_with_args(std::env::args_os()));
}
