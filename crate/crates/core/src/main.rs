fn main() {
    std::process::exit(scenekit::cli::run(std::env::args_os()));
}
