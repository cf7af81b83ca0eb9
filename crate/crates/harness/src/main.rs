fn main() -> std::process::ExitCode {
    dualguard::cli::main()
}
