fn main() {
    std::process::exit(roster::cli::main_with(std::env::args_os()));
}
