fn main() {
    std::process::exit(holderclt::cli::run(std::env::args_os()));
}
