fn main() {
    std::process::exit(sketchrecon::cli::main_with_args(std::env::args_os()));
}
