fn main() {
    std::process::exit(aml_subgraph::cli::main_with_args(std::env::args_os()));
}
