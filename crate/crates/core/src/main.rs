fn main() {
    std::process::exit(nlgalerkin::harness::cli::main(std::env::args_os()));
}
