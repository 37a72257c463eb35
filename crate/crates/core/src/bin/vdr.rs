fn main() {
    std::process::exit(vdr_core::cli::run(std::env::args_os()));
}
