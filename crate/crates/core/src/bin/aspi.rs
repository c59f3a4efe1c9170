fn main() {
    std::process::exit(aspi::cli::run_cli(std::env::args_os()));
}
