#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = teps_cli::io::parse_priorities_csv(data, 3, 2);
});
