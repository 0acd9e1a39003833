fn main() {
    std::process::exit(qnormal::cli::run(std::env::args_os()));
}
