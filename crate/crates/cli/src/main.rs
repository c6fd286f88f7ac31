fn main() {
    std::process::exit(cbs_cli::run(std::env::args_os()));
}
