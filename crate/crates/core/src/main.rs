fn main() {
    std::process::exit(iclust::cli::run(std::env::args_os()));
}
