fn main() {
    std::process::exit(dstat_cli::run(std::env::args_os()));
}
