fn main() {
    std::process::exit(leogo::cli::run(std::env::args_os()));
}
