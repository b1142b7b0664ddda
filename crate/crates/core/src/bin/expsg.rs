use std::process::ExitCode;

fn main() -> ExitCode {
    match expsg::cli::run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("expsg: {e}");
            ExitCode::FAILURE
        }
    }
}
