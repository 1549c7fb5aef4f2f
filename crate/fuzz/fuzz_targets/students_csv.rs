#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    for n_programs in [0usize, 1, 3] {
        let _ = teps_cli::io::parse_students_csv(data, n_programs);
    }
});
