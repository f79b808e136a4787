fn main() {
    std::process::exit(qmem_cli::cli::qmem_main(std::env::args_os()));
}
