//! Reference encoders (flate2 for gzip, liblzma through xz2 for xz and lzma-alone) and
//! kernel-ish random payloads.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rehost_core::container::RegionKind;

pub const CODECS: [RegionKind; 3] = [RegionKind::Gzip, RegionKind::Xz, RegionKind::Lzma];

pub fn encode(kind: RegionKind, data: &[u8]) -> Vec<u8> {
    match kind {
        RegionKind::Gzip => {
            let mut e = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::fast());
            e.write_all(data).unwrap();
            e.finish().unwrap()
        }
        RegionKind::Xz => {
            let mut e = xz2::write::XzEncoder::new(Vec::new(), 1);
            e.write_all(data).unwrap();
            e.finish().unwrap()
        }
        RegionKind::Lzma => {
            let opts = xz2::stream::LzmaOptions::new_preset(1).unwrap();
            let stream = xz2::stream::Stream::new_lzma_encoder(&opts).unwrap();
            let mut e = xz2::write::XzEncoder::new_stream(Vec::new(), stream);
            e.write_all(data).unwrap();
            e.finish().unwrap()
        }
        other => panic!("no encoder for {other:?}"),
    }
}

/// Noise, zero runs, repeated earlier spans and word tables, in random proportions.
pub fn payload(rng: &mut ChaCha8Rng, len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let n = rng.gen_range(1..=4096).min(len - out.len());
        match rng.gen_range(0..4) {
            0 => out.extend((0..n).map(|_| rng.gen::<u8>())),
            1 => out.resize(out.len() + n, 0),
            2 if out.len() > n => {
                let from = rng.gen_range(0..out.len() - n);
                out.extend_from_within(from..from + n);
            }
            _ => {
                let base: u32 = rng.gen::<u32>() & 0xfff0_0000;
                for _ in 0..n.div_ceil(4) {
                    out.extend((base | rng.gen_range(0..0x10_0000) & !3).to_le_bytes());
                }
                out.truncate(len);
            }
        }
    }
    out
}
