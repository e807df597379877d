fn main() {
    std::process::exit(lper::cli::run_subcommand(std::env::args_os()));
}
