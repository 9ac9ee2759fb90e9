fn main() {
    std::process::exit(halfbubble::cli::run());
}
