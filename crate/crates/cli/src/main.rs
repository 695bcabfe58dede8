fn main() {
    std::process::exit(spurprobe::run(std::env::args_os()));
}
