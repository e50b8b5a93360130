fn main() {
    std::process::exit(rqcsim::cli::main_with_args(std::env::args_os()));
}
