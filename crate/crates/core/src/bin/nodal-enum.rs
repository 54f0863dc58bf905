use std::io::{stderr, stdout};
use std::panic;
use std::process::ExitCode;

use nodal_enum::cli::{run, EXIT_USAGE};

fn main() -> ExitCode {
    panic::set_hook(Box::new(|info| {
        let msg = info
            .payload()
            .downcast_ref::<String>()
            .map(String::as_str)
            .or_else(|| info.payload().downcast_ref::<&str>().copied())
            .unwrap_or("unexpected failure");
        eprintln!("error: {msg}");
    }));
    let code = panic::catch_unwind(|| {
        run(
            std::env::args_os(),
            &mut stdout().lock(),
            &mut stderr().lock(),
        )
    })
    .unwrap_or(EXIT_USAGE);
    ExitCode::from(code.clamp(0, 255) as u8)
}
