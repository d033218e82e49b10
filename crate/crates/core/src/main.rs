fn main() {
    std::process::exit(cimsim::cli::main());
}
