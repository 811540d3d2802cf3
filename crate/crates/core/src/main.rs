fn main() {
    std::process::exit(penflow::cli::run(std::env::args_os()));
}
