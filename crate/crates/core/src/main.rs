fn main() {
    std::process::exit(poisson_asymptotics::cli::main_with_args(std::env::args_os()));
}
