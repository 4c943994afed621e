fn main() -> std::process::ExitCode {
    lowrate_mot::cli::main()
}
