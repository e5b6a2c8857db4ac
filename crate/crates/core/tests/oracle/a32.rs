//! Reference comparison for the A32 decoder: yaxpeax-arm, normalised to a shared shape.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use yaxpeax_arch::{Decoder, U8Reader};
use yaxpeax_arm::armv7::{self as yx, InstDecoder, Opcode, Operand, RegShiftStyle};

use rehost_core::disasm::{decode_word, MemOffset, Operand2, Operation};

/// Decoder-neutral shape of one instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Canon {
    Dp { op: u8, s: bool, rd: Option<u8>, rn: Option<u8>, op2: Op2 },
    Movt { rd: u8, imm: u16 },
    Mem { load: bool, byte: bool, user: bool, rt: u8, rn: u8, off: Off, pre: bool, up: bool, wb: bool },
    Multi { load: bool, rn: u8, regs: u16, inc: bool, before: bool, wb: bool, user: bool },
    Branch { link: bool, target: u32 },
    Bx { link: bool, rm: u8 },
    Status,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op2 {
    Imm(u32),
    Shift { rm: u8, kind: u8, amount: u8 },
    RegShift { rm: u8, kind: u8, rs: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Off {
    Imm(u16),
    Reg { rm: u8, kind: u8, amount: u8 },
}

const MOV: u8 = 13;
const MVN: u8 = 15;
const PC: u32 = 15;

fn is_move(op: u8) -> bool {
    op == MOV || op == MVN
}

fn is_test(op: u8) -> bool {
    (8..=11).contains(&op)
}

pub fn ours(word: u32, addr: u32) -> Option<Canon> {
    let i = decode_word(word, addr);
    Some(match i.op {
        Operation::DataProc { opcode, set_flags, rd, rn, op2 } => {
            let op = opcode as u8;
            let op2 = match op2 {
                Operand2::Imm { value, .. } => Op2::Imm(value),
                Operand2::ShiftImm { rm, kind, amount } => Op2::Shift { rm, kind: kind as u8, amount },
                Operand2::ShiftReg { rm, kind, rs } => Op2::RegShift { rm, kind: kind as u8, rs },
            };
            Canon::Dp { op, s: set_flags, rd: (!is_test(op)).then_some(rd), rn: (!is_move(op)).then_some(rn), op2 }
        }
        // MOVW is a MOV of a 16-bit immediate
        Operation::MoveWide { top: false, rd, imm16 } => Canon::Dp { op: MOV, s: false, rd: Some(rd), rn: None, op2: Op2::Imm(imm16 as u32) },
        Operation::MoveWide { top: true, rd, imm16 } => Canon::Movt { rd, imm: imm16 },
        Operation::Single { load, byte, rt, rn, offset, pre, up, writeback } => Canon::Mem {
            load,
            byte,
            user: !pre && word & (1 << 21) != 0,
            rt,
            rn,
            off: match offset {
                MemOffset::Imm(v) => Off::Imm(v),
                MemOffset::Reg { rm, kind, amount } => Off::Reg { rm, kind: kind as u8, amount },
            },
            pre,
            up,
            wb: writeback,
        },
        Operation::Multiple { load, rn, regs, increment, before, writeback, user } => {
            Canon::Multi { load, rn, regs, inc: increment, before, wb: writeback, user }
        }
        Operation::Branch { link, .. } => Canon::Branch { link, target: i.direct_target()? },
        Operation::BranchExchange { link, rm } => Canon::Bx { link, rm },
        Operation::Status { .. } => Canon::Status,
        Operation::Undecodable => return None,
    })
}

fn dp_index(op: Opcode, word: u32) -> Option<u8> {
    use Opcode::*;
    Some(match op {
        AND => 0,
        EOR => 1,
        SUB => 2,
        RSB => 3,
        ADD => 4,
        ADC => 5,
        SBC => 6,
        RSC => 7,
        TST => 8,
        TEQ => 9,
        CMP => 10,
        CMN => 11,
        ORR => 12,
        MOV => 13,
        BIC => 14,
        MVN => 15,
        // ADD/SUB with Rn = PC; the alias hides which, so take it from the opcode field
        ADR => ((word >> 21) & 0xf) as u8,
        _ => return None,
    })
}

fn reg(o: &Operand) -> Option<u8> {
    match o {
        Operand::Reg(r) => Some(r.number()),
        _ => None,
    }
}

fn shift_off(s: &yx::RegShift) -> Option<Off> {
    match s.into_shift() {
        RegShiftStyle::RegImm(x) => Some(Off::Reg { rm: x.shiftee().number(), kind: x.stype() as u8, amount: x.imm() }),
        RegShiftStyle::RegReg(_) => None,
    }
}

fn op2_of(o: &Operand) -> Option<Op2> {
    Some(match o {
        Operand::Imm32(v) => Op2::Imm(*v),
        Operand::Reg(r) => Op2::Shift { rm: r.number(), kind: 0, amount: 0 },
        Operand::RegShift(s) => match s.into_shift() {
            RegShiftStyle::RegImm(x) => Op2::Shift { rm: x.shiftee().number(), kind: x.stype() as u8, amount: x.imm() },
            RegShiftStyle::RegReg(x) => Op2::RegShift { rm: x.shiftee().number(), kind: x.stype() as u8, rs: x.shifter().number() },
        },
        _ => return None,
    })
}

pub fn reference(word: u32, addr: u32) -> Option<Canon> {
    let bytes = word.to_le_bytes();
    let mut inst = yx::Instruction::default();
    InstDecoder::default().decode_into(&mut inst, &mut U8Reader::new(&bytes)).ok()?;
    let ops = &inst.operands;
    let last = ops.iter().rposition(|o| *o != Operand::Nothing)?;
    if let Some(op) = dp_index(inst.opcode, word) {
        // operands are rd, rn, op2, except that an unshifted move drops rn
        return Some(Canon::Dp {
            op,
            s: inst.s(),
            rd: if is_test(op) { None } else { reg(&ops[0]) },
            rn: if is_move(op) { None } else { reg(&ops[1]) },
            op2: op2_of(&ops[last])?,
        });
    }
    let (load, byte, user) = match inst.opcode {
        Opcode::LDR => (true, false, false),
        Opcode::STR => (false, false, false),
        Opcode::LDRB => (true, true, false),
        Opcode::STRB => (false, true, false),
        Opcode::LDRT => (true, false, true),
        Opcode::STRT => (false, false, true),
        Opcode::LDRBT => (true, true, true),
        Opcode::STRBT => (false, true, true),
        Opcode::MOVT => {
            let Operand::Imm32(v) = ops[1] else { return None };
            return Some(Canon::Movt { rd: reg(&ops[0])?, imm: v as u16 });
        }
        Opcode::LDM(inc, before, _, user) | Opcode::STM(inc, before, _, user) => {
            let Operand::RegWBack(rn, wb) = ops[0] else { return None };
            let Operand::RegList(regs) = ops[1] else { return None };
            return Some(Canon::Multi { load: matches!(inst.opcode, Opcode::LDM(..)), rn: rn.number(), regs, inc, before, wb, user });
        }
        Opcode::B | Opcode::BL | Opcode::BLX if matches!(ops[0], Operand::BranchOffset(_) | Operand::BranchThumbOffset(_)) => {
            // BranchOffset already includes the pipeline's two words; BranchThumbOffset does not
            let target = match ops[0] {
                Operand::BranchOffset(n) => addr.wrapping_add((n << 2) as u32),
                Operand::BranchThumbOffset(n) => addr.wrapping_add(8).wrapping_add((n << 1) as u32),
                _ => unreachable!(),
            };
            return Some(Canon::Branch { link: inst.opcode != Opcode::B, target });
        }
        Opcode::BX | Opcode::BLX => return Some(Canon::Bx { link: inst.opcode == Opcode::BLX, rm: reg(&ops[0])? }),
        Opcode::MRS | Opcode::MSR => return Some(Canon::Status),
        _ => return None,
    };
    let rt = reg(&ops[0])?;
    let (rn, off, pre, up, wb) = match &ops[1] {
        Operand::RegDerefPreindexOffset(rn, imm, up, wb) => (rn, Off::Imm(*imm), true, *up, *wb),
        Operand::RegDerefPostindexOffset(rn, imm, up, _) => (rn, Off::Imm(*imm), false, *up, true),
        Operand::RegDerefPreindexReg(rn, rm, up, wb) => (rn, Off::Reg { rm: rm.number(), kind: 0, amount: 0 }, true, *up, *wb),
        Operand::RegDerefPostindexReg(rn, rm, up, _) => (rn, Off::Reg { rm: rm.number(), kind: 0, amount: 0 }, false, *up, true),
        Operand::RegDerefPreindexRegShift(rn, s, up, wb) => (rn, shift_off(s)?, true, *up, *wb),
        Operand::RegDerefPostindexRegShift(rn, s, up, _) => (rn, shift_off(s)?, false, *up, true),
        _ => return None,
    };
    Some(Canon::Mem { load, byte, user, rt, rn: rn.number(), off, pre, up, wb })
}

fn f(w: u32, hi: u32, lo: u32) -> u32 {
    (w >> lo) & ((1 << (hi - lo + 1)) - 1)
}

/// Words of the generated classes that the architecture leaves UNPREDICTABLE, straight from the
/// per-encoding pseudocode rather than from the decoder.
pub fn unpredictable(w: u32) -> bool {
    let (rn, rd, rs, rm) = (f(w, 19, 16), f(w, 15, 12), f(w, 11, 8), f(w, 3, 0));
    let op = f(w, 24, 21) as u8;
    let wb = f(w, 24, 24) == 0 || f(w, 21, 21) == 1;
    match f(w, 27, 25) {
        _ if w >> 28 == 0xf => false,
        // MOVW, MOVT
        0b001 if f(w, 24, 23) == 0b10 && f(w, 21, 20) == 0b00 => rd == PC,
        // data processing, or the misc space when a compare lacks S
        0b000 | 0b001 if is_test(op) && f(w, 20, 20) == 0 => match w & 0x0ff0_00f0 {
            0x0120_0010 => false,
            0x0120_0030 => rm == PC,
            // MRS
            _ if w & 0x0fbf_0fff == 0x010f_0000 => rd == PC,
            // MSR register
            _ => rn == 0 || rm == PC,
        },
        0b000 | 0b001 => {
            (is_test(op) && rd != 0)
                || (is_move(op) && rn != 0)
                || (f(w, 27, 25) == 0 && f(w, 4, 4) == 1 && [rd, rn, rm, rs].contains(&PC))
        }
        0b010 | 0b011 => {
            let reg_offset = f(w, 25, 25) == 1;
            (wb && (rn == PC || rn == rd)) || (reg_offset && rm == PC) || (f(w, 22, 22) == 1 && rd == PC)
        }
        0b100 => {
            let regs = f(w, 15, 0);
            let (user, w_bit, load) = (f(w, 22, 22) == 1, f(w, 21, 21) == 1, f(w, 20, 20) == 1);
            regs == 0
                || rn == PC
                || (user && w_bit && !(load && regs & (1 << PC) != 0))
                || (load && w_bit && regs & (1 << rn) != 0)
        }
        _ => false,
    }
}

/// Valid encodings the reference cannot decode: MOV and MVN with a register-specified shift.
pub fn reference_gap(w: u32) -> bool {
    w >> 28 != 0xf && f(w, 27, 25) == 0 && is_move(f(w, 24, 21) as u8) && f(w, 7, 4) & 0b1001 == 0b0001
}

/// One word from an encoding class inside the decoder's documented subset.
pub fn subset_word(rng: &mut ChaCha8Rng) -> u32 {
    let cond = rng.gen_range(0..15u32) << 28;
    let r = |rng: &mut ChaCha8Rng| rng.gen_range(0..16u32);
    let dp_fields = |rng: &mut ChaCha8Rng| {
        let op = rng.gen_range(0..16u32);
        // compares without S belong to the misc space
        let s = if (8..=11).contains(&op) { 1 } else { rng.gen_range(0..2u32) };
        (op << 21) | (s << 20) | (r(rng) << 16) | (r(rng) << 12)
    };
    cond | match rng.gen_range(0..12) {
        0 => 0x0200_0000 | dp_fields(rng) | rng.gen_range(0..0x1000u32),
        1 => dp_fields(rng) | (rng.gen_range(0..32u32) << 7) | (rng.gen_range(0..4u32) << 5) | r(rng),
        2 => dp_fields(rng) | (r(rng) << 8) | (rng.gen_range(0..4u32) << 5) | 0x10 | r(rng),
        3 => 0x0300_0000 | (rng.gen_range(0..2u32) << 22) | (rng.gen_range(0..0x10000u32) & 0xf0fff) | (r(rng) << 12),
        4 | 5 => 0x0400_0000 | (rng.gen_range(0..32u32) << 20) | (r(rng) << 16) | (r(rng) << 12) | rng.gen_range(0..0x1000u32),
        6 => 0x0600_0000 | (rng.gen_range(0..32u32) << 20) | (r(rng) << 16) | (r(rng) << 12) | ((rng.gen_range(0..0x80u32) << 5) & 0xfe0) | r(rng),
        7 => 0x0800_0000 | (rng.gen_range(0..32u32) << 20) | (r(rng) << 16) | rng.gen_range(0..0x10000u32),
        8 => 0x0a00_0000 | (rng.gen_range(0..2u32) << 24) | rng.gen_range(0..0x100_0000u32),
        9 => return 0xfa00_0000 | (rng.gen_range(0..2u32) << 24) | rng.gen_range(0..0x100_0000u32),
        10 => 0x012f_ff10 | (rng.gen_range(0..2u32) << 5) | r(rng),
        _ if rng.gen() => 0x010f_0000 | (rng.gen_range(0..2u32) << 22) | (r(rng) << 12),
        _ => 0x0120_f000 | (rng.gen_range(0..2u32) << 22) | (r(rng) << 16) | r(rng),
    }
}

#[derive(Debug, Default)]
pub struct Agreement {
    /// Decoded by both and equal.
    pub agreed: usize,
    /// UNPREDICTABLE words, all of which must be undecodable.
    pub unpredictable: usize,
    /// Register-shifted moves, checked field by field instead.
    pub gaps: usize,
    pub disagreements: Vec<String>,
}

/// Draws words until `want` of them have been compared against the reference.
pub fn run(rng: &mut ChaCha8Rng, want: usize) -> Agreement {
    let mut a = Agreement::default();
    while a.agreed < want {
        let w = subset_word(rng);
        let addr = rng.gen::<u32>() & !3;
        let got = ours(w, addr);
        if unpredictable(w) {
            a.unpredictable += 1;
            if got.is_some() {
                a.disagreements.push(format!("{w:08x}: UNPREDICTABLE but decoded as {got:?}"));
            }
            continue;
        }
        if reference_gap(w) {
            a.gaps += 1;
            let want = Canon::Dp {
                op: f(w, 24, 21) as u8,
                s: f(w, 20, 20) == 1,
                rd: Some(f(w, 15, 12) as u8),
                rn: None,
                op2: Op2::RegShift { rm: f(w, 3, 0) as u8, kind: f(w, 6, 5) as u8, rs: f(w, 11, 8) as u8 },
            };
            if got != Some(want.clone()) {
                a.disagreements.push(format!("{w:08x}: {got:?}, fields say {want:?}"));
            }
            continue;
        }
        let theirs = reference(w, addr);
        if got.is_some() && got == theirs {
            a.agreed += 1;
        } else {
            a.disagreements.push(format!("{w:08x} at {addr:#x}: ours {got:?}, reference {theirs:?}"));
            if a.disagreements.len() > 50 {
                break;
            }
        }
    }
    a
}
