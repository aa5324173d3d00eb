fn main() {
    std::process::exit(foe_predict::cli::run());
}
