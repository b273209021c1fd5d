fn main() {
    std::process::exit(sgrecon_cli::run(std::env::args_os()));
}
