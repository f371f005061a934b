fn main() {
    std::process::exit(repmatch::cli::run(std::env::args_os()));
}
