fn main() {
    std::process::exit(monochoice::cli::main_with_args(std::env::args_os()));
}
