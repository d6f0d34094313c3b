use std::process::exit;

fn main() {
    exit(modsamp::experiments::cli::cli_main(std::env::args_os()));
}
