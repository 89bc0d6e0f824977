fn main() {
    let code = gexp::cli::run(std::env::args_os());
    std::process::exit(code);
}
