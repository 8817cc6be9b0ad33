fn main() {
    eprintln!("prymtau: command-line interface not wired up yet");
    std::process::exit(3);
}
