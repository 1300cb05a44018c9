fn main() {
    std::process::exit(tvcert::cli::run(std::env::args_os()));
}
