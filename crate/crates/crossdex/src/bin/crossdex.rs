fn main() {
    std::process::exit(crossdex::cli::main());
}
