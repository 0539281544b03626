fn main() {
    std::process::exit(umbilic::cli::run(std::env::args_os()));
}
