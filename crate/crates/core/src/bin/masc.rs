fn main() {
    std::process::exit(masc::cli::main());
}
