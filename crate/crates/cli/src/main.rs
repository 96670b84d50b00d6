fn main() {
    std::process::exit(sonclust_cli::dispatch(std::env::args_os()));
}
