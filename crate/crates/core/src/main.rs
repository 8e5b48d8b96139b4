use softshift::cli;

fn main() {
    std::process::exit(cli::run());
}
