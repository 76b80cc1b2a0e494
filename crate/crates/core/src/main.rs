fn main() {
    std::process::exit(boojum::cli::run(std::env::args_os()));
}
