fn main() {
    std::process::exit(sticker_forge_cli::run(std::env::args_os()));
}
