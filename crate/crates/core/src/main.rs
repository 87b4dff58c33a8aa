fn main() -> std::process::ExitCode {
    gpival::pipeline::cli::main()
}
