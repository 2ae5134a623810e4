fn main() {
    std::process::exit(netmig::cli::run(std::env::args_os()));
}
