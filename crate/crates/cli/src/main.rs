fn main() {
    let (code, msg) = offense_cli::cli::run(std::env::args_os());
    if code == 0 {
        println!("{msg}");
    } else {
        eprintln!("{msg}");
    }
    std::process::exit(code);
}
