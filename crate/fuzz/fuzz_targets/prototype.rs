#![no_main]
use dgn_core::iodp::Prototype;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(p) = Prototype::from_bytes(data) {
        assert_eq!(p.to_bytes().unwrap(), data);
    }
});
