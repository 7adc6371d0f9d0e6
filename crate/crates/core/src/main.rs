fn main() {
    std::process::exit(plumekit::cli::run_with_args(std::env::args_os()));
}
