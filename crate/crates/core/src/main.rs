fn main() {
    std::process::exit(viriallab::cli::run_cli(std::env::args_os()));
}
