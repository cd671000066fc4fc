fn main() {
    std::process::exit(pdc_calib::cli::main_with_args(std::env::args_os()));
}
