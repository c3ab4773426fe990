fn main() {
    std::process::exit(iqfrl::cli::run());
}
