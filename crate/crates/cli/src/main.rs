fn main() {
    std::process::exit(astral_cli::run(std::env::args_os()));
}
