fn main() {
    std::process::exit(qfi::cli::cli_main(std::env::args_os()));
}
