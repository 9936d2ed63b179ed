fn main() {
    std::process::exit(crts::cli::run());
}
