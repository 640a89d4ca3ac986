fn main() {
    std::process::exit(memlab::cli::run_cli(std::env::args_os()));
}
