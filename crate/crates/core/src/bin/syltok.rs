fn main() {
    std::process::exit(syltok::cli::cli_main(std::env::args_os()));
}
