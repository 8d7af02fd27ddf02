fn main() {
    std::process::exit(lks_cli::main_with(std::env::args_os()));
}
