fn main() {
    std::process::exit(latent_probe::cli::run(std::env::args_os()));
}
