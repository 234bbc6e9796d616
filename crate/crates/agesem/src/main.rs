fn main() {
    // placeholder; the CLI is wired up once the solver stack is in place
    eprintln!("agesem: not yet wired");
    std::process::exit(2);
}
