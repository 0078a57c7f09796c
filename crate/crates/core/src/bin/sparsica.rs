fn main() {
    std::process::exit(sparsica::cli::run(std::env::args_os()));
}
