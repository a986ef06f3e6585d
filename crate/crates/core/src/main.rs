fn main() {
    std::process::exit(tensorkit::cli::run(std::env::args_os()));
}
