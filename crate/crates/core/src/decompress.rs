//! zImage handling: the `head.S` call into the decompressor, and the payload itself.

use std::io::{self, Read};

use serde::Serialize;
use thiserror::Error;

use crate::container::{self, EmbeddedRegion, KernelBlob, RegionKind};
use crate::disasm::{Cond, DpOpcode, Instruction, MemOffset, Operand2, Operation, ShiftKind, PC, SP};
use crate::emu::{self, LiteralMemory, RegisterState};
use crate::exec::{self, Execution};

/// Virtual address the ARM kernel is linked at on nearly every board.
pub const DEFAULT_LOAD_BASE: u32 = 0xc000_8000;

/// Upper bound on a decompressed kernel; anything larger is treated as a corrupt stream.
pub const MAX_KERNEL_SIZE: usize = 256 << 20;

/// How far back from the call the emulation window may reach.
const WINDOW_LIMIT: usize = 64;

#[derive(Debug, Error)]
pub enum DecompressError {
    #[error("decompressor call pattern not found")]
    PatternNotFound,
    #[error("r0 is not statically known at the call at {0:#010x}")]
    Unrecoverable(u32),
    #[error("no validated gzip, xz or lzma stream in the blob")]
    NoCompressedStream,
    #[error("{kind:?} stream at offset {offset:#x} is corrupt: {source}")]
    CorruptStream {
        kind: RegionKind,
        offset: usize,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KernelImage {
    #[serde(skip)]
    pub bytes: Vec<u8>,
    pub load_base: u32,
    pub version: Option<String>,
    /// Offset of the decoded stream inside the blob it came from.
    pub stream_offset: usize,
    pub codec: RegionKind,
}

fn is_mov(i: &Instruction) -> Option<(u8, Operand2)> {
    match i.op {
        Operation::DataProc { opcode: DpOpcode::Mov, set_flags: false, rd, op2, .. } if i.cond.is_always() => Some((rd, op2)),
        _ => None,
    }
}

fn is_reg_copy(i: &Instruction, dst: u8) -> Option<u8> {
    match is_mov(i)? {
        (rd, Operand2::ShiftImm { rm, kind: ShiftKind::Lsl, amount: 0 }) if rd == dst && rm != PC => Some(rm),
        _ => None,
    }
}

fn dp_imm(i: &Instruction, want: DpOpcode) -> Option<(u8, u8, u32)> {
    match i.op {
        Operation::DataProc { opcode, rd, rn, op2: Operand2::Imm { value, .. }, .. } if opcode == want && i.cond.is_always() => {
            Some((rd, rn, value))
        }
        _ => None,
    }
}

fn is_bss_store(i: &Instruction, rt: u8, rn: u8) -> bool {
    i.cond.is_always()
        && matches!(
            i.op,
            Operation::Single { load: false, byte: false, rt: t, rn: n, offset: MemOffset::Imm(4), pre: false, up: true, writeback: true }
                if t == rt && n == rn
        )
}

fn is_branch(i: &Instruction, link: bool) -> bool {
    matches!(i.op, Operation::Branch { link: l, exchange: false, .. } if l == link)
}

/// Number of instructions in the call-site shape, ending with the call itself.
pub const STUB_LEN: usize = 15;

/// Whether `w` (exactly [`STUB_LEN`] instructions) has the decompressor call-site shape.
pub fn matches_stub(w: &[Instruction]) -> bool {
    if w.len() != STUB_LEN {
        return false;
    }
    let Some((zero_reg, Operand2::Imm { value: 0, .. })) = is_mov(&w[0]) else {
        return false;
    };
    let Operation::Single { rn: ptr, .. } = w[1].op else {
        return false;
    };
    if !(1..5).all(|k| is_bss_store(&w[k], zero_reg, ptr)) {
        return false;
    }
    if !matches!(w[5].op, Operation::DataProc { opcode: DpOpcode::Cmp, rn, .. } if rn == ptr) || !w[5].cond.is_always() {
        return false;
    }
    if !(is_branch(&w[6], false) && w[6].cond == Cond::CC && w[6].direct_target() == Some(w[1].addr)) {
        return false;
    }
    let Some((_, flag_reg, 1)) = dp_imm(&w[7], DpOpcode::Tst) else {
        return false;
    };
    if dp_imm(&w[8], DpOpcode::Bic) != Some((flag_reg, flag_reg, 1)) {
        return false;
    }
    if !(is_branch(&w[9], true) && w[9].cond == Cond::NE) {
        return false;
    }
    is_reg_copy(&w[10], 0).is_some()
        && is_reg_copy(&w[11], 1) == Some(SP)
        && dp_imm(&w[12], DpOpcode::Add) == Some((2, SP, 0x10000))
        && is_mov(&w[13]).is_some()
        && is_branch(&w[14], true)
        && w[14].cond.is_always()
}

/// Address of the `bl decompress_kernel` that follows the bss-clearing loop in `head.S`.
pub fn locate_decompress_call(instrs: &[Instruction]) -> Result<u32, DecompressError> {
    locate_decompress_call_with(instrs, Execution::default())
}

pub fn locate_decompress_call_with(instrs: &[Instruction], exec: Execution) -> Result<u32, DecompressError> {
    let windows = instrs.len().saturating_sub(STUB_LEN - 1);
    exec::position_first(exec, windows, |i| matches_stub(&instrs[i..i + STUB_LEN]))
        .map(|i| instrs[i + STUB_LEN - 1].addr)
        .ok_or(DecompressError::PatternNotFound)
}

/// Value of r0 at the call, by constant propagation over the straight-line code before it.
///
/// The window extends backwards until an unconditional jump that is not a call, or
/// 64 instructions. `init` seeds the state at the start of the window.
pub fn recover_output_start(
    instrs: &[Instruction],
    call_addr: u32,
    mem: Option<&dyn LiteralMemory>,
    init: RegisterState,
) -> Result<u32, DecompressError> {
    let Some(call) = instrs.iter().position(|i| i.addr == call_addr) else {
        return Err(DecompressError::Unrecoverable(call_addr));
    };
    let mut start = call;
    while start > 0 && call - start < WINDOW_LIMIT {
        let prev = &instrs[start - 1];
        if prev.writes_pc && !prev.is_call && !prev.is_conditional() {
            break;
        }
        start -= 1;
    }
    emu::run_block(&instrs[start..call], init, mem)
        .get(0)
        .known()
        .ok_or(DecompressError::Unrecoverable(call_addr))
}

/// Inflates the first header-validated gzip, xz or lzma stream in `blob`.
///
/// `load_base` is [`DEFAULT_LOAD_BASE`]; callers with better knowledge overwrite it.
pub fn decompress_payload(blob: &KernelBlob) -> Result<KernelImage, DecompressError> {
    let candidates: Vec<EmbeddedRegion> = container::scan_bytes(&blob.bytes, Execution::default())
        .into_iter()
        .filter(|r| r.kind.is_compressed() && r.is_validated())
        .collect();
    let mut last_err = None;
    for region in candidates {
        match decode_stream(&blob.bytes[region.offset..], region.kind) {
            Ok(bytes) if !bytes.is_empty() => {
                let version = detect_kernel_version(&bytes);
                return Ok(KernelImage { bytes, load_base: DEFAULT_LOAD_BASE, version, stream_offset: region.offset, codec: region.kind });
            }
            Ok(_) => {
                let source = io::Error::new(io::ErrorKind::UnexpectedEof, "stream decodes to nothing");
                last_err = Some(DecompressError::CorruptStream { kind: region.kind, offset: region.offset, source });
            }
            Err(source) => last_err = Some(DecompressError::CorruptStream { kind: region.kind, offset: region.offset, source }),
        }
    }
    Err(last_err.unwrap_or(DecompressError::NoCompressedStream))
}

/// Decodes one stream starting at `data[0]`; bytes after end-of-stream are ignored.
pub fn decode_stream(data: &[u8], kind: RegionKind) -> io::Result<Vec<u8>> {
    let mut out = Vec::new();
    match kind {
        RegionKind::Gzip => {
            flate2::read::GzDecoder::new(data).take(MAX_KERNEL_SIZE as u64 + 1).read_to_end(&mut out)?;
        }
        RegionKind::Xz => {
            lzma_rs::xz_decompress(&mut io::BufReader::new(xz_stream(data)?), &mut out).map_err(lzma_err)?;
        }
        RegionKind::Lzma => {
            let opts = lzma_rs::decompress::Options {
                memlimit: Some(MAX_KERNEL_SIZE + 1),
                allow_incomplete: false,
                ..Default::default()
            };
            // The decoder refuses bytes after the end marker, but by then the cursor sits
            // exactly at the end of the stream.
            let mut cursor = io::Cursor::new(data);
            if lzma_rs::lzma_decompress_with_options(&mut cursor, &mut out, &opts).is_err() {
                let end = cursor.position() as usize;
                out.clear();
                lzma_rs::lzma_decompress_with_options(&mut &data[..end], &mut out, &opts).map_err(lzma_err)?;
            }
        }
        _ => return Err(io::Error::new(io::ErrorKind::InvalidInput, "not a compressed stream")),
    }
    if out.len() > MAX_KERNEL_SIZE {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "decompressed size exceeds limit"));
    }
    Ok(out)
}

fn lzma_err(e: lzma_rs::error::Error) -> io::Error {
    match e {
        lzma_rs::error::Error::IoError(e) => e,
        other => io::Error::new(io::ErrorKind::InvalidData, other.to_string()),
    }
}

/// Trims `data` to the first xz stream: the decoder rejects trailing bytes, and zImage appends
/// a size word. The stream ends at the first footer magic `YZ` whose backward size and CRC
/// agree.
fn xz_stream(data: &[u8]) -> io::Result<&[u8]> {
    let mut from = 12;
    while let Some(p) = memchr::memmem::find(&data[from..], b"YZ") {
        let end = from + p + 2;
        if end >= 24 && end % 4 == 0 {
            let footer = &data[end - 12..end];
            let crc = u32::from_le_bytes(footer[0..4].try_into().unwrap());
            if crc32fast::hash(&footer[4..10]) == crc && footer[8..10] == data[6..8] {
                return Ok(&data[..end]);
            }
        }
        from += p + 1;
    }
    Err(io::Error::new(io::ErrorKind::UnexpectedEof, "xz stream footer not found"))
}

const VERSION_MARKER: &[u8] = b"Linux version ";

/// The dotted numeric token after the first `Linux version ` that has one.
pub fn detect_kernel_version(kernel: &[u8]) -> Option<String> {
    memchr::memmem::find_iter(kernel, VERSION_MARKER).find_map(|p| {
        let rest = &kernel[p + VERSION_MARKER.len()..];
        let len = rest.iter().take_while(|b| b.is_ascii_digit() || **b == b'.').count();
        let token = std::str::from_utf8(&rest[..len]).ok()?.trim_end_matches('.');
        (token.starts_with(|c: char| c.is_ascii_digit())).then(|| token.to_string())
    })
}
