fn main() {
    std::process::exit(anneal::cli::run_from_os_args());
}
