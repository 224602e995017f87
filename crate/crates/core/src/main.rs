fn main() {
    std::process::exit(shm_recover::cli::run(std::env::args_os()));
}
