//! Bit-at-a-time reflected CRC-32 (polynomial 0xEDB88320), no tables.

pub fn crc32(data: &[u8]) -> u32 {
    let mut crc = !0u32;
    for &b in data {
        crc ^= b as u32;
        for _ in 0..8 {
            crc = if crc & 1 == 1 { (crc >> 1) ^ 0xedb8_8320 } else { crc >> 1 };
        }
    }
    !crc
}

pub fn be32(b: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(b[at..at + 4].try_into().unwrap())
}

/// Header and data checksums of the uImage at the start of `img`, recomputed from scratch.
/// Returns (stored header crc, computed header crc, stored data crc, computed data crc).
pub fn uimage_sums(img: &[u8]) -> (u32, u32, u32, u32) {
    let mut header = img[..64].to_vec();
    let stored = be32(&header, 4);
    header[4..8].fill(0);
    let size = be32(&header, 12) as usize;
    (stored, crc32(&header), be32(img, 24), crc32(&img[64..64 + size]))
}
