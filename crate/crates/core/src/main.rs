fn main() {
    std::process::exit(pitchreg::cli::run(std::env::args_os()));
}
