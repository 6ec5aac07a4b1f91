fn main() {
    std::process::exit(ocmesh_cli::main_with_args(std::env::args_os()));
}
