//! A32 word decoder.
//!
//! Supported subset (everything else is [`Klass::Undecodable`]):
//!
//! * data-processing, immediate / immediate-shift / register-shift operand forms,
//! * `MOVW` / `MOVT`,
//! * single-word and single-byte loads and stores, immediate and register offsets
//!   (including the unprivileged `LDRT`/`STRT` forms),
//! * `LDM` / `STM` in all four addressing modes, which covers `PUSH` / `POP`,
//! * `B`, `BL`, `BLX` (immediate and register), `BX`,
//! * `MRS` and `MSR`, classified as [`Klass::Other`].
//!
//! Multiplies, halfword/doubleword transfers, media, coprocessor, `SVC` and the remaining
//! unconditional-space encodings are outside the subset. Encodings the architecture marks
//! UNPREDICTABLE inside the subset are also reported as undecodable.

use serde::Serialize;

pub const SP: u8 = 13;
pub const LR: u8 = 14;
pub const PC: u8 = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Klass {
    BranchImm,
    BranchReg,
    Loadstore,
    Dataproc,
    Other,
    Undecodable,
}

impl Klass {
    pub fn as_str(self) -> &'static str {
        match self {
            Klass::BranchImm => "branch_imm",
            Klass::BranchReg => "branch_reg",
            Klass::Loadstore => "loadstore",
            Klass::Dataproc => "dataproc",
            Klass::Other => "other",
            Klass::Undecodable => "undecodable",
        }
    }
}

/// The 4-bit condition field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cond(pub u8);

impl Cond {
    pub const EQ: Cond = Cond(0x0);
    pub const NE: Cond = Cond(0x1);
    pub const CC: Cond = Cond(0x3);
    pub const AL: Cond = Cond(0xe);

    /// True unless the instruction only executes under some flag combination.
    pub fn is_always(self) -> bool {
        self.0 >= 0xe
    }

    /// Evaluates the condition against concrete NZCV flags (bit 3 = N ... bit 0 = V).
    pub fn holds(self, nzcv: u8) -> bool {
        let n = nzcv & 8 != 0;
        let z = nzcv & 4 != 0;
        let c = nzcv & 2 != 0;
        let v = nzcv & 1 != 0;
        match self.0 {
            0x0 => z,
            0x1 => !z,
            0x2 => c,
            0x3 => !c,
            0x4 => n,
            0x5 => !n,
            0x6 => v,
            0x7 => !v,
            0x8 => c && !z,
            0x9 => !c || z,
            0xa => n == v,
            0xb => n != v,
            0xc => !z && n == v,
            0xd => z || n != v,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DpOpcode {
    And,
    Eor,
    Sub,
    Rsb,
    Add,
    Adc,
    Sbc,
    Rsc,
    Tst,
    Teq,
    Cmp,
    Cmn,
    Orr,
    Mov,
    Bic,
    Mvn,
}

impl DpOpcode {
    fn from_bits(bits: u32) -> Self {
        use DpOpcode::*;
        [And, Eor, Sub, Rsb, Add, Adc, Sbc, Rsc, Tst, Teq, Cmp, Cmn, Orr, Mov, Bic, Mvn][bits as usize & 0xf]
    }

    /// Compare/test opcodes write only the flags.
    pub fn is_test(self) -> bool {
        matches!(self, DpOpcode::Tst | DpOpcode::Teq | DpOpcode::Cmp | DpOpcode::Cmn)
    }

    /// `MOV` and `MVN` ignore the first operand register.
    pub fn is_move(self) -> bool {
        matches!(self, DpOpcode::Mov | DpOpcode::Mvn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShiftKind {
    Lsl,
    Lsr,
    Asr,
    Ror,
}

impl ShiftKind {
    fn from_bits(bits: u32) -> Self {
        [ShiftKind::Lsl, ShiftKind::Lsr, ShiftKind::Asr, ShiftKind::Ror][bits as usize & 3]
    }
}

/// Flexible second operand of a data-processing instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand2 {
    /// Rotated 8-bit immediate, already expanded. `carry_rotated` is set when the rotation is
    /// non-zero, in which case an `S` variant updates C from bit 31 of the value.
    Imm { value: u32, carry_rotated: bool },
    /// Register shifted by an immediate. `ROR #0` encodes `RRX`.
    ShiftImm { rm: u8, kind: ShiftKind, amount: u8 },
    /// Register shifted by the bottom byte of another register.
    ShiftReg { rm: u8, kind: ShiftKind, rs: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MemOffset {
    Imm(u16),
    Reg { rm: u8, kind: ShiftKind, amount: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operation {
    DataProc { opcode: DpOpcode, set_flags: bool, rd: u8, rn: u8, op2: Operand2 },
    /// `MOVW` (`top == false`) or `MOVT`.
    MoveWide { top: bool, rd: u8, imm16: u16 },
    Single { load: bool, byte: bool, rt: u8, rn: u8, offset: MemOffset, pre: bool, up: bool, writeback: bool },
    Multiple { load: bool, rn: u8, regs: u16, increment: bool, before: bool, writeback: bool, user: bool },
    /// `B`, `BL`, or `BLX <imm>` (`exchange`). `offset` is the byte displacement from `addr + 8`.
    Branch { link: bool, exchange: bool, offset: i32 },
    BranchExchange { link: bool, rm: u8 },
    /// `MRS` (with its destination) or `MSR`.
    Status { dest: Option<u8> },
    Undecodable,
}

/// One decoded A32 word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub addr: u32,
    pub word: u32,
    pub klass: Klass,
    pub is_call: bool,
    pub writes_pc: bool,
    /// Statically known branch destinations; empty for register branches.
    pub branch_targets: Vec<u32>,
    /// Address read by a PC-relative immediate load, `addr + 8 ± offset`.
    pub literal_ref: Option<u32>,
    pub immediates: Vec<u32>,
    pub cond: Cond,
    pub op: Operation,
}

impl Instruction {
    pub fn is_conditional(&self) -> bool {
        !self.cond.is_always()
    }

    /// Ends a basic block: any PC write or branch.
    pub fn ends_block(&self) -> bool {
        self.writes_pc || matches!(self.klass, Klass::BranchImm | Klass::BranchReg)
    }

    /// Function return: `BX LR`, `MOV PC, LR`, or a pop/load into PC from SP.
    pub fn is_return(&self) -> bool {
        match self.op {
            Operation::BranchExchange { link: false, rm: LR } => true,
            Operation::DataProc { opcode: DpOpcode::Mov, rd: PC, op2: Operand2::ShiftImm { rm: LR, amount: 0, kind: ShiftKind::Lsl }, .. } => true,
            Operation::Multiple { load: true, rn: SP, regs, .. } => regs & (1 << PC) != 0,
            Operation::Single { load: true, rt: PC, rn: SP, .. } => true,
            _ => false,
        }
    }

    /// Destination of a direct branch, if any.
    pub fn direct_target(&self) -> Option<u32> {
        match self.klass {
            Klass::BranchImm => self.branch_targets.first().copied(),
            _ => None,
        }
    }
}

fn bits(word: u32, hi: u32, lo: u32) -> u32 {
    (word >> lo) & ((1 << (hi - lo + 1)) - 1)
}

fn bit(word: u32, n: u32) -> bool {
    word & (1 << n) != 0
}

fn reg(word: u32, lo: u32) -> u8 {
    bits(word, lo + 3, lo) as u8
}

/// Decodes `word` located at `addr`. Never fails.
pub fn decode_word(word: u32, addr: u32) -> Instruction {
    let cond = Cond(bits(word, 31, 28) as u8);
    let op = if cond.0 == 0xf { decode_unconditional(word) } else { decode_conditional(word) };
    finish(word, addr, cond, op)
}

fn decode_unconditional(word: u32) -> Operation {
    if bits(word, 27, 25) == 0b101 {
        let h = bits(word, 24, 24) as i32;
        let offset = (((word << 8) as i32) >> 6) | (h << 1);
        return Operation::Branch { link: true, exchange: true, offset };
    }
    Operation::Undecodable
}

fn decode_conditional(word: u32) -> Operation {
    match bits(word, 27, 25) {
        0b000 => decode_dp_register(word),
        0b001 => decode_dp_immediate(word),
        0b010 => decode_single(word),
        0b011 if !bit(word, 4) => decode_single(word),
        0b100 => decode_multiple(word),
        0b101 => {
            let offset = ((word << 8) as i32) >> 6;
            Operation::Branch { link: bit(word, 24), exchange: false, offset }
        }
        _ => Operation::Undecodable,
    }
}

fn decode_dp_immediate(word: u32) -> Operation {
    let opcode = DpOpcode::from_bits(bits(word, 24, 21));
    let set_flags = bit(word, 20);
    let rd = reg(word, 12);
    let rn = reg(word, 16);
    if opcode.is_test() && !set_flags {
        return match bits(word, 24, 21) {
            0b1000 | 0b1010 => {
                if rd == PC {
                    return Operation::Undecodable;
                }
                let imm16 = ((bits(word, 19, 16) << 12) | bits(word, 11, 0)) as u16;
                Operation::MoveWide { top: bits(word, 24, 21) == 0b1010, rd, imm16 }
            }
            // MSR immediate; a zero mask with R clear is the hint space.
            _ if bits(word, 19, 16) != 0 && bits(word, 15, 12) == 0xf => Operation::Status { dest: None },
            _ => Operation::Undecodable,
        };
    }
    if !dp_register_fields_ok(opcode, rd, rn) {
        return Operation::Undecodable;
    }
    let rotate = bits(word, 11, 8) * 2;
    let value = bits(word, 7, 0).rotate_right(rotate);
    Operation::DataProc { opcode, set_flags, rd, rn, op2: Operand2::Imm { value, carry_rotated: rotate != 0 } }
}

/// Should-be-zero fields: `Rd` of compares and `Rn` of moves.
fn dp_register_fields_ok(opcode: DpOpcode, rd: u8, rn: u8) -> bool {
    !(opcode.is_test() && rd != 0) && !(opcode.is_move() && rn != 0)
}

fn decode_dp_register(word: u32) -> Operation {
    let opcode = DpOpcode::from_bits(bits(word, 24, 21));
    let set_flags = bit(word, 20);
    if bit(word, 4) && bit(word, 7) {
        // Multiplies and extra load/stores.
        return Operation::Undecodable;
    }
    if opcode.is_test() && !set_flags {
        return decode_misc(word);
    }
    let rd = reg(word, 12);
    let rn = reg(word, 16);
    let rm = reg(word, 0);
    let kind = ShiftKind::from_bits(bits(word, 6, 5));
    if !dp_register_fields_ok(opcode, rd, rn) {
        return Operation::Undecodable;
    }
    let op2 = if bit(word, 4) {
        let rs = reg(word, 8);
        if [rd, rn, rm, rs].contains(&PC) {
            return Operation::Undecodable;
        }
        Operand2::ShiftReg { rm, kind, rs }
    } else {
        Operand2::ShiftImm { rm, kind, amount: bits(word, 11, 7) as u8 }
    };
    Operation::DataProc { opcode, set_flags, rd, rn, op2 }
}

fn decode_misc(word: u32) -> Operation {
    let rm = reg(word, 0);
    match word & 0x0fff_fff0 {
        0x012f_ff10 => return Operation::BranchExchange { link: false, rm },
        0x012f_ff30 if rm != PC => return Operation::BranchExchange { link: true, rm },
        _ => {}
    }
    if word & 0x0fbf_0fff == 0x010f_0000 && reg(word, 12) != PC {
        return Operation::Status { dest: Some(reg(word, 12)) };
    }
    if word & 0x0fb0_fff0 == 0x0120_f000 && bits(word, 19, 16) != 0 && rm != PC {
        return Operation::Status { dest: None };
    }
    Operation::Undecodable
}

fn decode_single(word: u32) -> Operation {
    let pre = bit(word, 24);
    let up = bit(word, 23);
    let byte = bit(word, 22);
    let w = bit(word, 21);
    let load = bit(word, 20);
    let rn = reg(word, 16);
    let rt = reg(word, 12);
    let writeback = !pre || w;
    let offset = if bit(word, 25) {
        let rm = reg(word, 0);
        if rm == PC {
            return Operation::Undecodable;
        }
        MemOffset::Reg { rm, kind: ShiftKind::from_bits(bits(word, 6, 5)), amount: bits(word, 11, 7) as u8 }
    } else {
        MemOffset::Imm(bits(word, 11, 0) as u16)
    };
    if writeback && (rn == PC || rn == rt) {
        return Operation::Undecodable;
    }
    if byte && rt == PC {
        return Operation::Undecodable;
    }
    Operation::Single { load, byte, rt, rn, offset, pre, up, writeback }
}

fn decode_multiple(word: u32) -> Operation {
    let regs = bits(word, 15, 0) as u16;
    let rn = reg(word, 16);
    let writeback = bit(word, 21);
    let load = bit(word, 20);
    let user = bit(word, 22);
    if regs == 0 || rn == PC {
        return Operation::Undecodable;
    }
    if user && writeback && (!load || regs & (1 << PC) == 0) {
        return Operation::Undecodable;
    }
    if load && writeback && regs & (1 << rn) != 0 {
        return Operation::Undecodable;
    }
    Operation::Multiple { load, rn, regs, increment: bit(word, 23), before: bit(word, 24), writeback, user }
}

fn finish(word: u32, addr: u32, cond: Cond, op: Operation) -> Instruction {
    let mut instr = Instruction {
        addr,
        word,
        klass: Klass::Undecodable,
        is_call: false,
        writes_pc: false,
        branch_targets: Vec::new(),
        literal_ref: None,
        immediates: Vec::new(),
        cond,
        op,
    };
    match op {
        Operation::DataProc { opcode, rd, op2, .. } => {
            instr.writes_pc = rd == PC && !opcode.is_test();
            instr.klass = if instr.writes_pc { Klass::BranchReg } else { Klass::Dataproc };
            if let Operand2::Imm { value, .. } = op2 {
                instr.immediates.push(value);
            }
        }
        Operation::MoveWide { top, imm16, .. } => {
            instr.klass = Klass::Dataproc;
            instr.immediates.push(if top { (imm16 as u32) << 16 } else { imm16 as u32 });
        }
        Operation::Single { load, rt, rn, offset, pre, up, writeback, .. } => {
            instr.writes_pc = load && rt == PC;
            instr.klass = if instr.writes_pc { Klass::BranchReg } else { Klass::Loadstore };
            if let MemOffset::Imm(imm) = offset {
                if imm != 0 {
                    instr.immediates.push(imm as u32);
                }
                if rn == PC && pre && !writeback {
                    let base = addr.wrapping_add(8);
                    instr.literal_ref =
                        Some(if up { base.wrapping_add(imm as u32) } else { base.wrapping_sub(imm as u32) });
                }
            }
        }
        Operation::Multiple { load, regs, .. } => {
            instr.writes_pc = load && regs & (1 << PC) != 0;
            instr.klass = if instr.writes_pc { Klass::BranchReg } else { Klass::Loadstore };
        }
        Operation::Branch { link, offset, .. } => {
            instr.klass = Klass::BranchImm;
            instr.writes_pc = true;
            instr.is_call = link;
            instr.branch_targets.push(addr.wrapping_add(8).wrapping_add(offset as u32));
        }
        Operation::BranchExchange { link, .. } => {
            instr.klass = Klass::BranchReg;
            instr.writes_pc = true;
            instr.is_call = link;
        }
        Operation::Status { .. } => instr.klass = Klass::Other,
        Operation::Undecodable => {}
    }
    instr
}
