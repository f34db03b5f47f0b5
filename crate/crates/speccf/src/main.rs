fn main() {
    std::process::exit(speccf::cli::run_from_env());
}
