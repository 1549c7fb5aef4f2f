#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = teps_cli::io::parse_rols_csv(data, 4, 3);
    let _ = teps_cli::io::parse_rols_csv(data, 0, 0);
});
