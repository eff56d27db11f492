fn main() {
    std::process::exit(salina::cli::run());
}
