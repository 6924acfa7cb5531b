fn main() {
    std::process::exit(quid_lab::cli::run(std::env::args_os()));
}
