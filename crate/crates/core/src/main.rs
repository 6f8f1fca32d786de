fn main() {
    std::process::exit(rsma_mmf::cli::run());
}
