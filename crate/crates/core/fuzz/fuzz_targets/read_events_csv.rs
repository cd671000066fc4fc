#![no_main]

use libfuzzer_sys::fuzz_target;
use pdc_calib::stream_gen::PairedEventStream;

fuzz_target!(|data: &[u8]| {
    if let Ok(stream) = PairedEventStream::read_csv(data, 1.0) {
        let mut buf = Vec::new();
        stream.write_csv(&mut buf).unwrap();
        let again = PairedEventStream::read_csv(buf.as_slice(), 1.0).expect("written dump parses");
        assert_eq!(stream, again);
    }
});
