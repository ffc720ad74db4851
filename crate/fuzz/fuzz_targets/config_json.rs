#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(config) = faquad_cli::parse_config(text) {
            // anything accepted must also build a model
            let _ = config.model.spec().expect("validated config builds its model");
        }
    }
});
