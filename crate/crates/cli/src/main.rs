fn main() {
    std::process::exit(hmf_cli::run(std::env::args_os()));
}
