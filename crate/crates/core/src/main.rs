fn main() {
    let code = gchan::cli::run(std::env::args());
    std::process::exit(code);
}
