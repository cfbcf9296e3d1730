fn main() {
    std::process::exit(anisowave::cli::run(std::env::args().skip(1)));
}
