fn main() {
    std::process::exit(barw::cli::run());
}
