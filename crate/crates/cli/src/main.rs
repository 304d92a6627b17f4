fn main() {
    std::process::exit(ilc_cli::run(std::env::args_os()));
}
