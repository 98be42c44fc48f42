fn main() {
    std::process::exit(crsense::cli::cli_main(std::env::args_os()));
}
