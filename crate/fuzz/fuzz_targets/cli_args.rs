#![no_main]
use clap::Parser;
use libfuzzer_sys::fuzz_target;
use rotkey_cli::args::Cli;

// Argument parsing only; nothing is executed.
fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let args = std::iter::once("rotkey").chain(s.split('\n'));
        let _ = Cli::try_parse_from(args);
    }
});
