fn main() {
    std::process::exit(fletcher::cli::run(std::env::args_os()));
}
