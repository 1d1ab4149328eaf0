fn main() {
    std::process::exit(dtfd_mil::cli::run(std::env::args_os()));
}
