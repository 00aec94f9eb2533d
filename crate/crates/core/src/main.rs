fn main() {
    std::process::exit(sparsetrace::cli::run(std::env::args_os()));
}
