fn main() {
    std::process::exit(nlpot::cli::run(std::env::args_os()));
}
