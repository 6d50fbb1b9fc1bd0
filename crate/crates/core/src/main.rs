fn main() {
    std::process::exit(qmem_core::cli::main_with_args(std::env::args_os()));
}
