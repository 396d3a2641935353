fn main() {
    std::process::exit(mpicsel::cli::run(std::env::args_os()));
}
