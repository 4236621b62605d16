fn main() {
    std::process::exit(tripcraft_cli::main_with(std::env::args_os()));
}
