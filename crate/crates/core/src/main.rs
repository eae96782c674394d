fn main() {
    std::process::exit(blockboruta::cli::run(std::env::args_os()));
}
