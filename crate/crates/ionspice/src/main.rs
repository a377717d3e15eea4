fn main() {
    std::process::exit(ionspice::cli::run(std::env::args_os()));
}
