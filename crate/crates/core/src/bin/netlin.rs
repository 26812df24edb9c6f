fn main() {
    std::process::exit(netlin::cli::cli_main(std::env::args_os()));
}
