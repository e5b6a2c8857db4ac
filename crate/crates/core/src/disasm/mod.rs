//! Linear-sweep A32 disassembly and basic-block graph construction.
//!
//! Every 4-byte word of the input becomes exactly one [`Instruction`]; inline data simply decodes
//! as whatever it happens to encode. Downstream filters tolerate the resulting false positives,
//! while nothing that is really code can be skipped.

mod cfg;
mod decode;

pub use cfg::{build_cfg, build_cfg_with, BasicBlock, CallEdge, Cfg, Successor};
pub use decode::{
    decode_word, Cond, DpOpcode, Instruction, Klass, MemOffset, Operand2, Operation, ShiftKind,
    LR, PC, SP,
};

use thiserror::Error;

use crate::exec::{self, Execution};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DisasmError {
    #[error("input length {0} is not a multiple of 4")]
    MisalignedInput(usize),
    #[error("base address {0:#010x} is not 4-aligned")]
    MisalignedBase(u32),
    #[error("{len:#x} bytes at {base:#010x} overflow the 32-bit address space")]
    AddressOverflow { base: u32, len: usize },
}

/// Decodes one instruction per little-endian word of `blob`, starting at `base`.
pub fn linear_sweep(blob: &[u8], base: u32) -> Result<Vec<Instruction>, DisasmError> {
    linear_sweep_with(blob, base, Execution::default())
}

pub fn linear_sweep_with(blob: &[u8], base: u32, exec: Execution) -> Result<Vec<Instruction>, DisasmError> {
    if blob.len() % 4 != 0 {
        return Err(DisasmError::MisalignedInput(blob.len()));
    }
    if base % 4 != 0 {
        return Err(DisasmError::MisalignedBase(base));
    }
    if base as u64 + blob.len() as u64 > 1 << 32 {
        return Err(DisasmError::AddressOverflow { base, len: blob.len() });
    }
    Ok(exec::map_range(exec, 0..blob.len() / 4, |i| {
        let word = u32::from_le_bytes(blob[i * 4..i * 4 + 4].try_into().unwrap());
        decode_word(word, base + (i as u32) * 4)
    }))
}

/// One line of the debug dump: address, word, class and static targets.
pub fn dump_line(instr: &Instruction) -> String {
    let mut line = format!("{:08x}: {:08x} {}", instr.addr, instr.word, instr.klass.as_str());
    if instr.is_call {
        line.push_str(" call");
    }
    for t in &instr.branch_targets {
        line.push_str(&format!(" -> {t:08x}"));
    }
    if let Some(lit) = instr.literal_ref {
        line.push_str(&format!(" [{lit:08x}]"));
    }
    line
}
