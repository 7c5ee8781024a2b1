#![no_main]
use dgn_core::corpus::LabelMap;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(lm) = LabelMap::from_bytes(data) {
        let bytes = lm.to_bytes().unwrap();
        assert_eq!(bytes, data);
        let _ = lm.nn_resize(3, 2);
    }
});
