#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(relations) = teps_cli::io::read_relations_csv(data, 4, 6) {
        // Closure must never panic on parsed input; cycles become errors.
        for rels in &relations {
            let _ = teps::infer::transitive_closure(rels);
        }
    }
});
