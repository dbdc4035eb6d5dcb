fn main() {
    std::process::exit(gwr_route_cli::run(std::env::args_os()));
}
