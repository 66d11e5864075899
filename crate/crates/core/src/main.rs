fn main() {
    let code = binrec::cli::run_from_args(std::env::args().collect());
    std::process::exit(code);
}
