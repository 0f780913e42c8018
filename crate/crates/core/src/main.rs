fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    std::process::exit(bitext_nmt::cli::main_with_args(std::env::args_os()));
}
