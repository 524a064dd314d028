fn main() {
    std::process::exit(hybrid_crd::cli::run(std::env::args_os()));
}
