fn main() {
    std::process::exit(cklab::cli::run());
}
