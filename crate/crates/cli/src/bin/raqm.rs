fn main() {
    std::process::exit(qmem_cli::cli::raqm_main(std::env::args_os()));
}
