fn main() {
    std::process::exit(afc_qmem::cli::main());
}
