fn main() {
    std::process::exit(nanodimer::cli::main_with_args(std::env::args_os()));
}
