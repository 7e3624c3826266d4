#![no_main]

use fenand::waveform::BiasWaveform;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(w) = s.parse::<BiasWaveform>() {
        let again: BiasWaveform = w.to_string().parse().unwrap();
        assert_eq!(again, w);
    }
});
