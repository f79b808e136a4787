fn main() {
    std::process::exit(qmem_cli::cli::certify_main(std::env::args_os()));
}
