//! Firmware container scanning and U-Boot legacy image handling.
//!
//! The scanner knows exactly four container kinds: gzip, xz, LZMA-alone and the 64-byte legacy
//! U-Boot header. Every magic hit is reported, overlapping or not; callers decide which region to
//! trust. A hit is upgraded to [`Confidence::HeaderValidated`] when the format-specific header
//! behind the magic parses cleanly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};

pub const UIMAGE_MAGIC: u32 = 0x2705_1956;
pub const UIMAGE_HEADER_LEN: usize = 64;

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];
const XZ_MAGIC: [u8; 6] = [0xfd, 0x37, 0x7a, 0x58, 0x5a, 0x00];
const LZMA_PROPS_DEFAULT: u8 = 0x5d;
const LZMA_HEADER_LEN: usize = 13;

const SCAN_CHUNK: usize = 1 << 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContainerError {
    #[error("firmware image is empty")]
    EmptyImage,
    #[error("container at {offset:#x} declares {declared} bytes but only {available} remain")]
    TruncatedContainer { offset: usize, declared: usize, available: usize },
    #[error("region offset {offset:#x} lies outside the image")]
    RegionOutOfBounds { offset: usize },
    #[error("bad U-Boot header at {offset:#x}: {reason}")]
    BadHeader { offset: usize, reason: &'static str },
}

/// A raw firmware dump. Immutable once loaded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirmwareImage {
    bytes: Vec<u8>,
    origin: String,
}

impl FirmwareImage {
    pub fn new(bytes: Vec<u8>, origin: impl Into<String>) -> Result<Self, ContainerError> {
        if bytes.is_empty() {
            return Err(ContainerError::EmptyImage);
        }
        Ok(FirmwareImage { bytes, origin: origin.into() })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Gzip,
    Xz,
    Lzma,
    Uimage,
    Raw,
}

impl RegionKind {
    pub fn is_compressed(self) -> bool {
        matches!(self, RegionKind::Gzip | RegionKind::Xz | RegionKind::Lzma)
    }

    pub fn extension(self) -> &'static str {
        match self {
            RegionKind::Gzip => "gz",
            RegionKind::Xz => "xz",
            RegionKind::Lzma => "lzma",
            RegionKind::Uimage => "uimage",
            RegionKind::Raw => "bin",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    MagicOnly,
    HeaderValidated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmbeddedRegion {
    pub offset: usize,
    pub kind: RegionKind,
    pub confidence: Confidence,
}

impl EmbeddedRegion {
    /// A region covering `image` from `offset` to its end, with no format assumed.
    pub fn raw(offset: usize) -> Self {
        EmbeddedRegion { offset, kind: RegionKind::Raw, confidence: Confidence::MagicOnly }
    }

    pub fn is_validated(&self) -> bool {
        self.confidence == Confidence::HeaderValidated
    }
}

/// A (usually compressed) kernel payload carved out of a firmware image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelBlob {
    pub bytes: Vec<u8>,
    pub source_region: EmbeddedRegion,
}

impl KernelBlob {
    /// Treats a whole file as the kernel payload.
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        KernelBlob { bytes, source_region: EmbeddedRegion::raw(0) }
    }
}

/// Finds every known container magic in `image`, sorted by offset.
pub fn scan_signatures(image: &FirmwareImage) -> Vec<EmbeddedRegion> {
    scan_bytes(image.bytes(), Execution::default())
}

pub fn scan_signatures_with(image: &FirmwareImage, exec: Execution) -> Vec<EmbeddedRegion> {
    scan_bytes(image.bytes(), exec)
}

/// Signature scan over an arbitrary byte slice.
pub fn scan_bytes(data: &[u8], exec: Execution) -> Vec<EmbeddedRegion> {
    let chunks = data.len().div_ceil(SCAN_CHUNK);
    exec::flat_map_range(exec, 0..chunks, |chunk| {
        let start = chunk * SCAN_CHUNK;
        let end = (start + SCAN_CHUNK).min(data.len());
        (start..end).filter_map(|offset| probe(data, offset)).collect()
    })
}

fn probe(data: &[u8], offset: usize) -> Option<EmbeddedRegion> {
    let tail = &data[offset..];
    let (kind, validated) = match tail.first()? {
        0x1f if tail.starts_with(&GZIP_MAGIC) => (RegionKind::Gzip, gzip_header_len(tail).is_some()),
        0xfd if tail.starts_with(&XZ_MAGIC) => (RegionKind::Xz, xz_header_valid(tail)),
        0x27 if tail.len() >= 4 && be32(tail, 0) == UIMAGE_MAGIC => {
            (RegionKind::Uimage, UImageHeader::parse_at(data, offset).is_ok())
        }
        &LZMA_PROPS_DEFAULT if lzma_magic(tail) => (RegionKind::Lzma, lzma_header_valid(tail)),
        _ => return None,
    };
    let confidence = if validated { Confidence::HeaderValidated } else { Confidence::MagicOnly };
    Some(EmbeddedRegion { offset, kind, confidence })
}

/// Length of a well-formed gzip member header, if the bytes carry one.
fn gzip_header_len(b: &[u8]) -> Option<usize> {
    const FHCRC: u8 = 0x02;
    const FEXTRA: u8 = 0x04;
    const FNAME: u8 = 0x08;
    const FCOMMENT: u8 = 0x10;

    if b.len() < 10 || b[2] != 8 || b[3] & 0xe0 != 0 {
        return None;
    }
    let flags = b[3];
    let mut pos = 10;
    if flags & FEXTRA != 0 {
        let xlen = u16::from_le_bytes(b.get(pos..pos + 2)?.try_into().ok()?) as usize;
        pos += 2 + xlen;
    }
    for flag in [FNAME, FCOMMENT] {
        if flags & flag != 0 {
            let nul = memchr::memchr(0, b.get(pos..)?)?;
            pos += nul + 1;
        }
    }
    if flags & FHCRC != 0 {
        pos += 2;
    }
    // The deflate body must start inside the image.
    (pos < b.len()).then_some(pos)
}

fn xz_header_valid(b: &[u8]) -> bool {
    if b.len() < 12 || b[6] != 0 || b[7] & 0xf0 != 0 {
        return false;
    }
    if !matches!(b[7], 0x00 | 0x01 | 0x04 | 0x0a) {
        return false;
    }
    crc32fast::hash(&b[6..8]) == u32::from_le_bytes(b[8..12].try_into().unwrap())
}

fn lzma_dict_is_common(dict: u32) -> bool {
    (12..=27).any(|n| dict == 1 << n) || (12..=26).any(|n| dict == (1 << n) | (1 << (n - 1)))
}

fn lzma_magic(b: &[u8]) -> bool {
    b.len() >= 5 && b[0] == LZMA_PROPS_DEFAULT && lzma_dict_is_common(le32(b, 1))
}

fn lzma_header_valid(b: &[u8]) -> bool {
    if b.len() <= LZMA_HEADER_LEN || b[0] >= 225 {
        return false;
    }
    let size = u64::from_le_bytes(b[5..13].try_into().unwrap());
    let size_ok = size == u64::MAX || size <= 1 << 30;
    // The range coder always starts with a zero byte.
    size_ok && b[LZMA_HEADER_LEN] == 0
}

/// Carves the payload that `region` describes out of `image`.
pub fn extract_kernel(image: &FirmwareImage, region: &EmbeddedRegion) -> Result<KernelBlob, ContainerError> {
    extract_from(image.bytes(), region)
}

pub fn extract_from(data: &[u8], region: &EmbeddedRegion) -> Result<KernelBlob, ContainerError> {
    let offset = region.offset;
    if offset >= data.len() {
        return Err(ContainerError::RegionOutOfBounds { offset });
    }
    let bytes = match region.kind {
        RegionKind::Uimage => {
            let header = UImageHeader::parse_at(data, offset)?;
            let start = offset + UIMAGE_HEADER_LEN;
            let declared = header.data_size as usize;
            let available = data.len() - start;
            if declared > available {
                return Err(ContainerError::TruncatedContainer { offset, declared, available });
            }
            data[start..start + declared].to_vec()
        }
        // Compressed streams run to the end of the image; decoders stop at end-of-stream.
        _ => data[offset..].to_vec(),
    };
    Ok(KernelBlob { bytes, source_region: *region })
}

/// Decoded legacy U-Boot image header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UImageHeader {
    pub header_crc: u32,
    pub timestamp: u32,
    pub data_size: u32,
    pub load_addr: u32,
    pub entry_addr: u32,
    pub data_crc: u32,
    pub os: u8,
    pub arch: u8,
    pub image_type: u8,
    pub compression: u8,
    pub name: [u8; 32],
}

impl UImageHeader {
    const OS_LINUX: u8 = 5;
    const ARCH_ARM: u8 = 2;
    const TYPE_KERNEL: u8 = 2;
    const COMP_NONE: u8 = 0;

    /// Parses and checksums the header at `offset`. The data checksum is not verified here
    /// because the payload may be truncated; see [`UImageHeader::data_crc_matches`].
    pub fn parse_at(data: &[u8], offset: usize) -> Result<Self, ContainerError> {
        let raw = data
            .get(offset..offset + UIMAGE_HEADER_LEN)
            .ok_or(ContainerError::TruncatedContainer {
                offset,
                declared: UIMAGE_HEADER_LEN,
                available: data.len().saturating_sub(offset),
            })?;
        if be32(raw, 0) != UIMAGE_MAGIC {
            return Err(ContainerError::BadHeader { offset, reason: "magic mismatch" });
        }
        let header = UImageHeader {
            header_crc: be32(raw, 4),
            timestamp: be32(raw, 8),
            data_size: be32(raw, 12),
            load_addr: be32(raw, 16),
            entry_addr: be32(raw, 20),
            data_crc: be32(raw, 24),
            os: raw[28],
            arch: raw[29],
            image_type: raw[30],
            compression: raw[31],
            name: raw[32..64].try_into().unwrap(),
        };
        let mut zeroed = [0u8; UIMAGE_HEADER_LEN];
        zeroed.copy_from_slice(raw);
        zeroed[4..8].fill(0);
        if crc32fast::hash(&zeroed) != header.header_crc {
            return Err(ContainerError::BadHeader { offset, reason: "header checksum mismatch" });
        }
        Ok(header)
    }

    pub fn data_crc_matches(&self, payload: &[u8]) -> bool {
        crc32fast::hash(payload) == self.data_crc
    }

    fn encode(&self) -> [u8; UIMAGE_HEADER_LEN] {
        let mut out = [0u8; UIMAGE_HEADER_LEN];
        for (at, value) in [
            (0, UIMAGE_MAGIC),
            (8, self.timestamp),
            (12, self.data_size),
            (16, self.load_addr),
            (20, self.entry_addr),
            (24, self.data_crc),
        ] {
            out[at..at + 4].copy_from_slice(&value.to_be_bytes());
        }
        out[28] = self.os;
        out[29] = self.arch;
        out[30] = self.image_type;
        out[31] = self.compression;
        out[32..].copy_from_slice(&self.name);
        let crc = crc32fast::hash(&out);
        out[4..8].copy_from_slice(&crc.to_be_bytes());
        out
    }
}

/// Prepends a legacy U-Boot header (ARM Linux kernel, uncompressed, timestamp 0) to `blob`.
pub fn wrap_uimage(blob: &[u8], load_addr: u32, entry_addr: u32) -> Vec<u8> {
    let mut name = [0u8; 32];
    let label = b"Linux kernel";
    name[..label.len()].copy_from_slice(label);
    let header = UImageHeader {
        header_crc: 0,
        timestamp: 0,
        data_size: blob.len() as u32,
        load_addr,
        entry_addr,
        data_crc: crc32fast::hash(blob),
        os: UImageHeader::OS_LINUX,
        arch: UImageHeader::ARCH_ARM,
        image_type: UImageHeader::TYPE_KERNEL,
        compression: UImageHeader::COMP_NONE,
        name,
    };
    let mut out = Vec::with_capacity(UIMAGE_HEADER_LEN + blob.len());
    out.extend_from_slice(&header.encode());
    out.extend_from_slice(blob);
    out
}

fn be32(b: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(b[at..at + 4].try_into().unwrap())
}

fn le32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}
