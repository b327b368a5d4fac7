fn main() {
    std::process::exit(stochorder::cli::main());
}
