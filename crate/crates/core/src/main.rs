fn main() {
    std::process::exit(klab::cli::main_entry(std::env::args_os()));
}
