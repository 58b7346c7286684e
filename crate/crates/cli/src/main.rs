use std::io::Write;

fn main() {
    let out = lamina_cli::run_command(std::env::args_os());
    print!("{}", out.stdout);
    if !out.stderr.is_empty() {
        let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    }
    std::process::exit(out.code);
}
