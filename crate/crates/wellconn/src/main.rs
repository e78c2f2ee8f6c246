fn main() {
    std::process::exit(wellconn::cli_main());
}
