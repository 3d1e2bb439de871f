fn main() {
    std::process::exit(loopinv::cli::run(std::env::args_os()));
}
