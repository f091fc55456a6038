fn main() {
    std::process::exit(strongnl::cli::run(std::env::args_os()));
}
