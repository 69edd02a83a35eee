fn main() {
    std::process::exit(ordinal_crc::cli::main_with_args(std::env::args_os()));
}
