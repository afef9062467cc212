fn main() {
    std::process::exit(demon_sim::cli::dispatch(std::env::args_os()));
}
