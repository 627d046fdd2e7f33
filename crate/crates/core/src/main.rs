fn main() {
    std::process::exit(sumap::cli::run());
}
