fn main() {
    std::process::exit(boussinesq::cli::main_with_args(std::env::args_os()));
}
