#![no_main]
use dgn_core::model::DgnModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = DgnModel::from_bytes(data) {
        assert_eq!(model.to_bytes().unwrap(), data);
        let _ = model.to_eval_only();
    }
});
