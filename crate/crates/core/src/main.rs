fn main() {
    std::process::exit(dosc::cli::run(std::env::args_os()));
}
