fn main() {
    env_logger::init();
    std::process::exit(srlaser::cli::run(std::env::args_os()));
}
