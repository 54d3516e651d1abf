fn main() {
    std::process::exit(cchan_cli::run(std::env::args_os()));
}
