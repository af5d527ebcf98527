fn main() {
    std::process::exit(poromorph::harness::cli_dispatch(std::env::args()));
}
