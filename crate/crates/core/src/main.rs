fn main() -> std::process::ExitCode {
    robust_sysid::cli::main_with_args(std::env::args_os())
}
