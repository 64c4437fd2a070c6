fn main() -> std::process::ExitCode {
    kplab::cli::main()
}
