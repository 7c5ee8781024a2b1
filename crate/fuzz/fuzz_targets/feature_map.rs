#![no_main]
use dgn_core::corpus::FeatureMap;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(fm) = FeatureMap::from_bytes(data) {
        assert!(fm.values().iter().all(|v| v.is_finite()));
        assert_eq!(FeatureMap::from_bytes(&fm.to_bytes().unwrap()).unwrap(), fm);
    }
});
