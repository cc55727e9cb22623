fn main() {
    std::process::exit(benchlens_cli::run(std::env::args_os()));
}
