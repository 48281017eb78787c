fn main() {
    std::process::exit(tuned_source::cli::run(std::env::args_os()));
}
