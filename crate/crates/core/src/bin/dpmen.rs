fn main() {
    std::process::exit(dpmen::cli::cli_main(std::env::args_os()));
}
