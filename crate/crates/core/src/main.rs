fn main() {
    std::process::exit(noonlike::cli::run(std::env::args_os()));
}
