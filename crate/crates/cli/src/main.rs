fn main() {
    std::process::exit(thetaquant_cli::commands::main_with_args(std::env::args_os()));
}
