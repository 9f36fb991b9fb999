fn main() {
    std::process::exit(deep_feedback::pipeline::cli::run(std::env::args_os()));
}
