fn main() {
    std::process::exit(faultq::harness::run_cli(std::env::args_os()));
}
