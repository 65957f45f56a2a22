fn main() {
    std::process::exit(styler_cli::run(std::env::args_os()));
}
