fn main() {
    std::process::exit(blender_cli::run(std::env::args_os()));
}
