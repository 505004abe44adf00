fn main() {
    std::process::exit(isspc_cli::cli::run(std::env::args_os()));
}
