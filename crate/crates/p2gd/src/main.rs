fn main() {
    std::process::exit(p2gd::cli::main());
}
