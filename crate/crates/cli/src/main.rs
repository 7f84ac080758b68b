fn main() {
    std::process::exit(chainpulse_cli::run(std::env::args_os()));
}
