fn main() {
    std::process::exit(camo::cli::run());
}
