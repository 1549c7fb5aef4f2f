#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(partitions) = teps_cli::io::read_partitions_json(data) {
        for partition in &partitions {
            if partition.is_empty() {
                continue;
            }
            let rol = teps::market::Rol::new(vec![0]).unwrap();
            let tau = teps::infer::AttentionParam::new(50.0).unwrap();
            let _ = teps::infer::teps_infer(partition, &rol, tau, 128);
        }
    }
});
