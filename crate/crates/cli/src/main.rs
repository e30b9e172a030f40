fn main() {
    std::process::exit(slp_cli::run(std::env::args_os()));
}
