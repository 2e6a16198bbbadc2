fn main() {
    std::process::exit(endgeo::cli::run());
}
