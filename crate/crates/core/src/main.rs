fn main() {
    std::process::exit(manymac::cli::run(std::env::args_os()));
}
