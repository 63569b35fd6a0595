fn main() {
    std::process::exit(redo_lab::cli::main_with_args(std::env::args_os()));
}
