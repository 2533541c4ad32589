fn main() {
    std::process::exit(genza::cli::run(std::env::args_os()));
}
