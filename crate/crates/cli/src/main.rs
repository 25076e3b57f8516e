fn main() {
    std::process::exit(geomflux_cli::main_entry());
}
