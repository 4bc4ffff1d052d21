fn main() {
    std::process::exit(pnrate::cli::main());
}
