fn main() {
    std::process::exit(genval::cli::main());
}
