#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = teps_cli::config::RunConfig::parse(text) {
            let _ = cfg.tau_grid();
            let _ = cfg.hash();
            let _ = cfg.canonical();
        }
    }
});
