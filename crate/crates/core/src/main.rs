fn main() {
    std::process::exit(pointmatch::cli::run(std::env::args_os()));
}
