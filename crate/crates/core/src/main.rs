fn main() {
    std::process::exit(sqpack::cli::run(std::env::args_os()));
}
