fn main() {
    std::process::exit(robust_pca::cli::run(std::env::args_os()));
}
