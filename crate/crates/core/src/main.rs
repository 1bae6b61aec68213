fn main() {
    std::process::exit(hiercpt::cli::run(std::env::args_os()));
}
