fn main() {
    std::process::exit(pomfg::cli_io::run(std::env::args_os()));
}
