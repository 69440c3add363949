fn main() {
    std::process::exit(angkit::cli::run(std::env::args_os()));
}
