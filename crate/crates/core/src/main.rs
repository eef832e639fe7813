fn main() {
    std::process::exit(cer::cli::main());
}
