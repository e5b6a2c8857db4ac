//! Straight-line constant propagation over A32 instructions.
//!
//! Registers are either `Known` or `Unknown`. A value only becomes known from an immediate
//! operand, a PC read (`addr + 8`), or a literal-pool load from read-only image bytes; anything
//! the evaluator cannot model exactly degrades its destination to `Unknown`.

use crate::disasm::{DpOpcode, Instruction, MemOffset, Operand2, Operation, ShiftKind, LR, PC};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RegValue {
    Known(u32),
    #[default]
    Unknown,
}

impl RegValue {
    pub fn known(self) -> Option<u32> {
        match self {
            RegValue::Known(v) => Some(v),
            RegValue::Unknown => None,
        }
    }
}

/// Abstract machine state. `flags` holds NZCV in bits 3..0 when known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RegisterState {
    pub regs: [RegValue; 16],
    pub flags: Option<u8>,
}

impl RegisterState {
    pub fn unknown() -> Self {
        Self::default()
    }

    pub fn with(mut self, reg: u8, value: u32) -> Self {
        self.regs[reg as usize] = RegValue::Known(value);
        self
    }

    pub fn get(&self, reg: u8) -> RegValue {
        self.regs[reg as usize]
    }

    fn read(&self, reg: u8, addr: u32) -> Option<u32> {
        if reg == PC {
            Some(addr.wrapping_add(8))
        } else {
            self.regs[reg as usize].known()
        }
    }

    fn set(&mut self, reg: u8, value: Option<u32>) {
        if reg != PC {
            self.regs[reg as usize] = value.map_or(RegValue::Unknown, RegValue::Known);
        }
    }

    fn clobber(&mut self, reg: u8) {
        self.set(reg, None);
    }
}

/// Read-only memory for literal-pool loads.
pub trait LiteralMemory: Sync {
    fn read_word(&self, addr: u32) -> Option<u32>;
}

/// A flat image mapped at `base`.
#[derive(Debug, Clone, Copy)]
pub struct ImageView<'a> {
    pub base: u32,
    pub bytes: &'a [u8],
}

impl<'a> ImageView<'a> {
    pub fn new(base: u32, bytes: &'a [u8]) -> Self {
        ImageView { base, bytes }
    }
}

impl LiteralMemory for ImageView<'_> {
    fn read_word(&self, addr: u32) -> Option<u32> {
        let off = addr.checked_sub(self.base)? as usize;
        let raw = self.bytes.get(off..off.checked_add(4)?)?;
        Some(u32::from_le_bytes(raw.try_into().unwrap()))
    }
}

/// Evaluates one instruction.
pub fn step(state: &RegisterState, instr: &Instruction, mem: Option<&dyn LiteralMemory>) -> RegisterState {
    let mut next = *state;
    if !instr.cond.is_always() {
        match state.flags {
            Some(nzcv) if !instr.cond.holds(nzcv) => return next,
            Some(_) => {}
            None => {
                clobber_destinations(&mut next, instr);
                return next;
            }
        }
    }
    execute(&mut next, instr, mem);
    next
}

/// Left fold of [`step`] over a straight-line sequence.
pub fn run_block(instrs: &[Instruction], init: RegisterState, mem: Option<&dyn LiteralMemory>) -> RegisterState {
    instrs.iter().fold(init, |s, i| step(&s, i, mem))
}

fn execute(st: &mut RegisterState, instr: &Instruction, mem: Option<&dyn LiteralMemory>) {
    let addr = instr.addr;
    match instr.op {
        Operation::DataProc { opcode, set_flags, rd, rn, op2 } => {
            let carry_in = st.flags.map(|f| f & 2 != 0);
            let b = operand2(st, op2, addr, carry_in);
            let a = st.read(rn, addr);
            if opcode == DpOpcode::Cmp {
                st.flags = match (a, b) {
                    (Some(a), Some(b)) => Some(sub_flags(a, b)),
                    _ => None,
                };
                return;
            }
            if set_flags {
                st.flags = None;
            }
            if opcode.is_test() {
                return;
            }
            let result = alu(opcode, a, b, carry_in);
            st.set(rd, result);
        }
        Operation::MoveWide { top, rd, imm16 } => {
            let v = if top {
                st.read(rd, addr).map(|old| (old & 0xffff) | ((imm16 as u32) << 16))
            } else {
                Some(imm16 as u32)
            };
            st.set(rd, v);
        }
        Operation::Single { load, byte, rt, rn, offset, pre, up, writeback } => {
            let base = st.read(rn, addr);
            let off = match offset {
                MemOffset::Imm(imm) => Some(imm as u32),
                MemOffset::Reg { rm, kind, amount } => st.read(rm, addr).and_then(|v| shift_imm(v, kind, amount, None)),
            };
            let moved = base.zip(off).map(|(b, o)| if up { b.wrapping_add(o) } else { b.wrapping_sub(o) });
            if load {
                let literal = rn == PC && pre && !writeback && !byte && matches!(offset, MemOffset::Imm(_));
                let value = if literal { moved.and_then(|ea| mem.and_then(|m| m.read_word(ea))) } else { None };
                st.set(rt, value);
            }
            if writeback {
                st.set(rn, moved);
            }
        }
        Operation::Multiple { load, rn, regs, increment, writeback, .. } => {
            if load {
                (0..16u8).filter(|r| regs & (1 << r) != 0).for_each(|r| st.clobber(r));
            }
            if writeback && !(load && regs & (1 << rn) != 0) {
                let span = 4 * regs.count_ones();
                let v = st.read(rn, addr).map(|b| if increment { b.wrapping_add(span) } else { b.wrapping_sub(span) });
                st.set(rn, v);
            }
        }
        Operation::Branch { link: true, .. } | Operation::BranchExchange { link: true, .. } => clobber_call(st),
        Operation::Branch { .. } | Operation::BranchExchange { .. } => {}
        Operation::Status { dest } => {
            match dest {
                Some(rd) => st.clobber(rd),
                None => st.flags = None,
            }
        }
        Operation::Undecodable => clobber_undecodable(st, instr.word),
    }
}

/// Caller-saved registers, link register and flags are dead after a call.
fn clobber_call(st: &mut RegisterState) {
    for r in [0, 1, 2, 3, 12, LR] {
        st.clobber(r);
    }
    st.flags = None;
}

/// Every register field an encoding outside the decoded subset could write: the two usual
/// destination fields, the pair register of doubleword loads, and r0 for supervisor calls.
fn clobber_undecodable(st: &mut RegisterState, word: u32) {
    let hi = ((word >> 16) & 0xf) as u8;
    let mid = ((word >> 12) & 0xf) as u8;
    for r in [hi, mid, (mid + 1) & 0xf, 0] {
        st.clobber(r);
    }
    st.flags = None;
}

fn clobber_destinations(st: &mut RegisterState, instr: &Instruction) {
    match instr.op {
        Operation::DataProc { opcode, set_flags, rd, .. } => {
            if set_flags || opcode == DpOpcode::Cmp {
                st.flags = None;
            }
            if !opcode.is_test() {
                st.clobber(rd);
            }
        }
        Operation::MoveWide { rd, .. } => st.clobber(rd),
        Operation::Single { load, rt, rn, writeback, .. } => {
            if load {
                st.clobber(rt);
            }
            if writeback {
                st.clobber(rn);
            }
        }
        Operation::Multiple { load, rn, regs, writeback, .. } => {
            if load {
                (0..16u8).filter(|r| regs & (1 << r) != 0).for_each(|r| st.clobber(r));
            }
            if writeback {
                st.clobber(rn);
            }
        }
        Operation::Branch { link: true, .. } | Operation::BranchExchange { link: true, .. } => clobber_call(st),
        Operation::Branch { .. } | Operation::BranchExchange { .. } => {}
        Operation::Status { dest } => match dest {
            Some(rd) => st.clobber(rd),
            None => st.flags = None,
        },
        Operation::Undecodable => clobber_undecodable(st, instr.word),
    }
}

fn operand2(st: &RegisterState, op2: Operand2, addr: u32, carry: Option<bool>) -> Option<u32> {
    match op2 {
        Operand2::Imm { value, .. } => Some(value),
        Operand2::ShiftImm { rm, kind, amount } => shift_imm(st.read(rm, addr)?, kind, amount, carry),
        Operand2::ShiftReg { rm, kind, rs } => {
            let v = st.read(rm, addr)?;
            let n = st.read(rs, addr)? & 0xff;
            Some(match kind {
                ShiftKind::Lsl if n >= 32 => 0,
                ShiftKind::Lsl => v << n,
                ShiftKind::Lsr if n >= 32 => 0,
                ShiftKind::Lsr => v >> n,
                ShiftKind::Asr => ((v as i32) >> n.min(31)) as u32,
                ShiftKind::Ror => v.rotate_right(n % 32),
            })
        }
    }
}

/// Immediate-amount shift, honouring the `#0` encodings of LSR/ASR (32) and ROR (RRX).
fn shift_imm(v: u32, kind: ShiftKind, amount: u8, carry: Option<bool>) -> Option<u32> {
    let n = amount as u32;
    Some(match kind {
        ShiftKind::Lsl => v << n,
        ShiftKind::Lsr if n == 0 => 0,
        ShiftKind::Lsr => v >> n,
        ShiftKind::Asr if n == 0 => ((v as i32) >> 31) as u32,
        ShiftKind::Asr => ((v as i32) >> n) as u32,
        ShiftKind::Ror if n == 0 => ((carry? as u32) << 31) | (v >> 1),
        ShiftKind::Ror => v.rotate_right(n),
    })
}

fn alu(opcode: DpOpcode, a: Option<u32>, b: Option<u32>, carry: Option<bool>) -> Option<u32> {
    use DpOpcode::*;
    match opcode {
        Mov => b,
        Mvn => b.map(|b| !b),
        _ => {
            let (a, b) = (a?, b?);
            Some(match opcode {
                And => a & b,
                Eor => a ^ b,
                Sub => a.wrapping_sub(b),
                Rsb => b.wrapping_sub(a),
                Add => a.wrapping_add(b),
                Adc => a.wrapping_add(b).wrapping_add(carry? as u32),
                Sbc => a.wrapping_sub(b).wrapping_sub(!carry? as u32),
                Rsc => b.wrapping_sub(a).wrapping_sub(!carry? as u32),
                Orr => a | b,
                Bic => a & !b,
                Tst | Teq | Cmp | Cmn | Mov | Mvn => unreachable!(),
            })
        }
    }
}

/// NZCV after `a - b`.
fn sub_flags(a: u32, b: u32) -> u8 {
    let r = a.wrapping_sub(b);
    let n = r >> 31;
    let z = (r == 0) as u32;
    let c = (a >= b) as u32;
    let v = (((a ^ b) & (a ^ r)) >> 31) & 1;
    ((n << 3) | (z << 2) | (c << 1) | v) as u8
}
