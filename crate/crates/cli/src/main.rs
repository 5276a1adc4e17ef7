fn main() {
    std::process::exit(primseq_cli::run(std::env::args_os()));
}
