//! Address translation with a hijacked opaque region.
//!
//! Guest addresses go through an ARMv7 short-descriptor walk over the guest's own tables in
//! physical memory (sections and 4 KiB small pages). Addresses inside the opaque window are
//! translated by a separate table owned by the simulator and land in a backing store that has
//! no physical address at all, so nothing done there can show up in the guest's memory.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::disasm::{decode_word, Operation, LR};
use crate::emu::{self, LiteralMemory, RegValue, RegisterState};
use crate::transplant::PatchedDriver;

pub const DEFAULT_OPAQUE_BASE: u32 = 0xd000_0000;
pub const DEFAULT_OPAQUE_LEN: u32 = 0x10000;

pub const PAGE: u32 = 0x1000;
pub const SECTION: u32 = 0x10_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Access {
    Read,
    Write,
    Exec,
}

impl fmt::Display for Access {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Access::Read => "read",
            Access::Write => "write",
            Access::Exec => "exec",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub struct Perms {
    pub read: bool,
    pub write: bool,
    pub execute: bool,
}

impl Perms {
    pub const RWX: Perms = Perms { read: true, write: true, execute: true };

    pub fn allows(self, access: Access) -> bool {
        match access {
            Access::Read => self.read,
            Access::Write => self.write,
            Access::Exec => self.execute,
        }
    }

    pub fn parse(s: &str) -> Option<Perms> {
        let mut p = Perms::default();
        for c in s.chars() {
            match c {
                'r' => p.read = true,
                'w' => p.write = true,
                'x' => p.execute = true,
                '-' => {}
                _ => return None,
            }
        }
        Some(p)
    }
}

impl fmt::Display for Perms {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = |on, ch| if on { ch } else { '-' };
        write!(f, "{}{}{}", c(self.read, 'r'), c(self.write, 'w'), c(self.execute, 'x'))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Guest,
    Hijack,
}

/// For `Hijack`, `paddr` is an offset into the opaque backing store, not a physical address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Translation {
    pub paddr: u32,
    pub source: Source,
    pub perms: Perms,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MmuError {
    #[error("guest translation fault at level {level} for {vaddr:#010x}")]
    GuestFault { level: u8, vaddr: u32 },
    #[error("{access} permission fault at {vaddr:#010x}")]
    PermissionFault { vaddr: u32, access: Access },
    #[error("opaque window {offset:#x}+{len:#x} exceeds the region length {opaque_len:#x}")]
    OutOfOpaqueRange { offset: u32, len: u32, opaque_len: u32 },
    #[error("driver image of {len:#x} bytes does not fit at {load_addr:#010x}")]
    ImageTooLarge { load_addr: u32, len: usize },
    #[error("load address {0:#010x} is outside the opaque region")]
    NotInOpaqueRange(u32),
    #[error("opaque region {base:#010x}+{len:#x} wraps the address space")]
    BadOpaqueRange { base: u32, len: u32 },
}

/// Short-descriptor AP[2:0] in the privileged view. Domains are treated as client.
fn ap_perms(ap2: bool, ap: u32, xn: bool) -> Perms {
    let (read, write) = match (ap2, ap) {
        (false, 0) => (false, false),
        (false, _) => (true, true),
        (true, 1..=3) => (true, false),
        (true, _) => (false, false),
    };
    Perms { read, write, execute: read && !xn }
}

/// AP bits for a permission set. Write implies read in this format; execute-only has no
/// encoding and maps to no access.
fn perms_ap(p: Perms) -> (bool, u32) {
    match (p.read || p.write, p.write) {
        (_, true) => (false, 1),
        (true, false) => (true, 1),
        (false, false) => (false, 0),
    }
}

pub fn section_descriptor(paddr: u32, perms: Perms) -> u32 {
    let (ap2, ap) = perms_ap(perms);
    (paddr & 0xfff0_0000) | ((ap2 as u32) << 15) | (ap << 10) | ((!perms.execute as u32) << 4) | 0b10
}

pub fn coarse_descriptor(table_paddr: u32) -> u32 {
    (table_paddr & 0xffff_fc00) | 0b01
}

pub fn small_page_descriptor(paddr: u32, perms: Perms) -> u32 {
    let (ap2, ap) = perms_ap(perms);
    (paddr & 0xffff_f000) | ((ap2 as u32) << 9) | (ap << 4) | 0b10 | (!perms.execute as u32)
}

/// Guest physical memory, kept sparse by 4 KiB frame. Absent frames read as zero.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhysMem {
    frames: BTreeMap<u32, Box<[u8]>>,
}

impl PhysMem {
    pub fn read_u8(&self, paddr: u32) -> u8 {
        self.frames.get(&(paddr / PAGE)).map_or(0, |f| f[(paddr % PAGE) as usize])
    }

    pub fn write_u8(&mut self, paddr: u32, v: u8) {
        let f = self.frames.entry(paddr / PAGE).or_insert_with(|| vec![0; PAGE as usize].into_boxed_slice());
        f[(paddr % PAGE) as usize] = v;
    }

    pub fn read_word(&self, paddr: u32) -> u32 {
        u32::from_le_bytes(std::array::from_fn(|i| self.read_u8(paddr.wrapping_add(i as u32))))
    }

    pub fn write_word(&mut self, paddr: u32, v: u32) {
        for (i, b) in v.to_le_bytes().into_iter().enumerate() {
            self.write_u8(paddr.wrapping_add(i as u32), b);
        }
    }

    /// SHA-256 over every non-zero frame with its number; all-zero frames hash like absent ones.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for (n, f) in &self.frames {
            if f.iter().any(|&b| b != 0) {
                h.update(n.to_le_bytes());
                h.update(f);
            }
        }
        h.finalize().into()
    }

    pub fn frames(&self) -> impl Iterator<Item = (u32, &[u8])> {
        self.frames.iter().map(|(&n, f)| (n * PAGE, &f[..]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddressSpace {
    pub phys: PhysMem,
    /// Physical address of the guest L1 table (16 KiB aligned).
    pub ttbr: u32,
    opaque_base: u32,
    opaque_len: u32,
    /// One entry per opaque page: backing offset of the frame it maps.
    hijack: Vec<u32>,
    opaque_backing: Vec<u8>,
}

impl AddressSpace {
    pub fn new(ttbr: u32, opaque_base: u32, opaque_len: u32) -> Result<Self, MmuError> {
        if opaque_base as u64 + opaque_len as u64 > 1 << 32 || opaque_base % PAGE != 0 || opaque_len % PAGE != 0 {
            return Err(MmuError::BadOpaqueRange { base: opaque_base, len: opaque_len });
        }
        let mut space = AddressSpace {
            phys: PhysMem::default(),
            ttbr: ttbr & 0xffff_c000,
            opaque_base,
            opaque_len,
            hijack: Vec::new(),
            opaque_backing: vec![0; opaque_len as usize],
        };
        space.map_opaque(0, opaque_len)?;
        Ok(space)
    }

    pub fn with_defaults(ttbr: u32) -> Self {
        Self::new(ttbr, DEFAULT_OPAQUE_BASE, DEFAULT_OPAQUE_LEN).expect("defaults are a valid window")
    }

    pub fn opaque_base(&self) -> u32 {
        self.opaque_base
    }

    pub fn opaque_len(&self) -> u32 {
        self.opaque_len
    }

    pub fn in_opaque(&self, vaddr: u32) -> bool {
        vaddr.wrapping_sub(self.opaque_base) < self.opaque_len
    }

    pub fn opaque_backing(&self) -> &[u8] {
        &self.opaque_backing
    }

    /// Installs identity (offset-preserving) hijack entries for a window of the opaque region.
    pub fn map_opaque(&mut self, offset: u32, len: u32) -> Result<(), MmuError> {
        let end = offset as u64 + len as u64;
        if end > self.opaque_len as u64 {
            return Err(MmuError::OutOfOpaqueRange { offset, len, opaque_len: self.opaque_len });
        }
        if len == 0 {
            return Ok(());
        }
        self.hijack.resize((self.opaque_len / PAGE) as usize, 0);
        for page in offset / PAGE..(end as u32).div_ceil(PAGE) {
            self.hijack[page as usize] = page * PAGE;
        }
        Ok(())
    }

    /// Translation without a permission check.
    pub fn walk(&self, vaddr: u32) -> Result<Translation, MmuError> {
        if self.in_opaque(vaddr) {
            let off = vaddr - self.opaque_base;
            let frame = self.hijack[(off / PAGE) as usize];
            return Ok(Translation { paddr: frame + off % PAGE, source: Source::Hijack, perms: Perms::RWX });
        }
        let fault = |level| MmuError::GuestFault { level, vaddr };
        let l1 = self.phys.read_word(self.ttbr | ((vaddr >> 20) << 2));
        match l1 & 0b11 {
            0b01 => {
                let pxn = l1 & 0b100 != 0;
                let l2 = self.phys.read_word((l1 & 0xffff_fc00) | (((vaddr >> 12) & 0xff) << 2));
                if l2 & 0b10 == 0 {
                    // fault, or a 64 KiB large page, which is outside the supported subset
                    return Err(fault(2));
                }
                let mut perms = ap_perms(l2 & (1 << 9) != 0, (l2 >> 4) & 3, l2 & 1 != 0);
                perms.execute &= !pxn;
                Ok(Translation { paddr: (l2 & 0xffff_f000) | (vaddr & 0xfff), source: Source::Guest, perms })
            }
            0b10 | 0b11 => {
                if l1 & (1 << 18) != 0 {
                    // supersection
                    return Err(fault(1));
                }
                let mut perms = ap_perms(l1 & (1 << 15) != 0, (l1 >> 10) & 3, l1 & (1 << 4) != 0);
                perms.execute &= l1 & 1 == 0;
                Ok(Translation { paddr: (l1 & 0xfff0_0000) | (vaddr & 0xf_ffff), source: Source::Guest, perms })
            }
            _ => Err(fault(1)),
        }
    }

    pub fn translate(&self, vaddr: u32, access: Access) -> Result<Translation, MmuError> {
        let t = self.walk(vaddr)?;
        if !t.perms.allows(access) {
            return Err(MmuError::PermissionFault { vaddr, access });
        }
        Ok(t)
    }

    fn load_byte(&self, t: Translation) -> u8 {
        match t.source {
            Source::Hijack => self.opaque_backing[t.paddr as usize],
            Source::Guest => self.phys.read_u8(t.paddr),
        }
    }

    pub fn read(&self, vaddr: u32, len: u32, access: Access) -> Result<Vec<u8>, MmuError> {
        (0..len).map(|i| self.translate(vaddr.wrapping_add(i), access).map(|t| self.load_byte(t))).collect()
    }

    /// Checks every byte before writing any.
    pub fn write(&mut self, vaddr: u32, data: &[u8]) -> Result<(), MmuError> {
        let ts = (0..data.len() as u32).map(|i| self.translate(vaddr.wrapping_add(i), Access::Write)).collect::<Result<Vec<_>, _>>()?;
        for (t, &b) in ts.into_iter().zip(data) {
            match t.source {
                Source::Hijack => self.opaque_backing[t.paddr as usize] = b,
                Source::Guest => self.phys.write_u8(t.paddr, b),
            }
        }
        Ok(())
    }

    pub fn fetch_exec(&self, vaddr: u32, count: u32) -> Result<Vec<u8>, MmuError> {
        self.read(vaddr, count, Access::Exec)
    }

    /// Copies a patched driver into the opaque backing store.
    pub fn load_driver(&mut self, drv: &PatchedDriver) -> Result<(), MmuError> {
        self.load_image(drv.load_addr, &drv.image)
    }

    pub fn load_image(&mut self, load_addr: u32, image: &[u8]) -> Result<(), MmuError> {
        if !self.in_opaque(load_addr) {
            return Err(MmuError::NotInOpaqueRange(load_addr));
        }
        let off = (load_addr - self.opaque_base) as usize;
        if off + image.len() > self.opaque_len as usize {
            return Err(MmuError::ImageTooLarge { load_addr, len: image.len() });
        }
        // hijack frames are offset-preserving, so the window is contiguous in the backing store
        self.opaque_backing[off..off + image.len()].copy_from_slice(image);
        Ok(())
    }

    pub fn set_section(&mut self, vaddr: u32, paddr: u32, perms: Perms) {
        self.phys.write_word(self.ttbr | ((vaddr >> 20) << 2), section_descriptor(paddr, perms));
    }

    pub fn set_coarse(&mut self, vaddr: u32, table_paddr: u32) {
        self.phys.write_word(self.ttbr | ((vaddr >> 20) << 2), coarse_descriptor(table_paddr));
    }

    /// Needs a coarse table already installed for `vaddr`'s megabyte.
    pub fn set_small_page(&mut self, vaddr: u32, paddr: u32, perms: Perms) -> Result<(), MmuError> {
        let l1 = self.phys.read_word(self.ttbr | ((vaddr >> 20) << 2));
        if l1 & 0b11 != 0b01 {
            return Err(MmuError::GuestFault { level: 1, vaddr });
        }
        self.phys.write_word((l1 & 0xffff_fc00) | (((vaddr >> 12) & 0xff) << 2), small_page_descriptor(paddr, perms));
        Ok(())
    }
}

impl LiteralMemory for AddressSpace {
    fn read_word(&self, addr: u32) -> Option<u32> {
        let b = self.read(addr, 4, Access::Read).ok()?;
        Some(u32::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Where a call sequence left the opaque region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exit {
    pub pc: u32,
    pub lr: RegValue,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Mmu(#[from] MmuError),
    #[error("branch at {0:#010x} has an unknown destination or condition")]
    Undetermined(u32),
    #[error("still inside the opaque region after {0} steps")]
    StepLimit(usize),
}

/// Executes driver code from `pc` until control leaves the opaque region, fetching through the
/// translation layer. Branches are followed concretely; everything else goes through the
/// micro-emulator.
pub fn run_until_exit(space: &AddressSpace, mut pc: u32, mut state: RegisterState, max_steps: usize) -> Result<Exit, HarnessError> {
    for steps in 0..max_steps {
        if !space.in_opaque(pc) {
            return Ok(Exit { pc, lr: state.get(LR), steps });
        }
        let word = u32::from_le_bytes(space.fetch_exec(pc, 4)?.try_into().unwrap());
        let instr = decode_word(word, pc);
        let taken = match state.flags {
            _ if instr.cond.is_always() => true,
            Some(nzcv) => instr.cond.holds(nzcv),
            None => return Err(HarnessError::Undetermined(pc)),
        };
        if !taken {
            pc = pc.wrapping_add(4);
            continue;
        }
        let link = |st: &mut RegisterState| *st = st.with(LR, pc.wrapping_add(4));
        match instr.op {
            Operation::Branch { link: l, offset, .. } => {
                if l {
                    link(&mut state);
                }
                pc = pc.wrapping_add(8).wrapping_add(offset as u32);
            }
            Operation::BranchExchange { link: l, rm } => {
                let dest = state.get(rm).known().ok_or(HarnessError::Undetermined(pc))?;
                if l {
                    link(&mut state);
                }
                pc = dest & !1;
            }
            _ if instr.writes_pc => return Err(HarnessError::Undetermined(pc)),
            _ => {
                state = emu::step(&state, &instr, Some(space));
                pc = pc.wrapping_add(4);
            }
        }
    }
    Err(HarnessError::StepLimit(max_steps))
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("scenario line {line}: {message}")]
pub struct ScenarioError {
    pub line: usize,
    pub message: String,
}

/// Runs a scenario script and returns its transcript.
///
/// ```text
/// # comment
/// opaque <base> <len>            replace the space (must come first if present)
/// ttbr <paddr>
/// section <va> <pa> <perms>      perms like rwx, r-x, rw-
/// coarse <va> <table-pa>
/// page <va> <pa> <perms>
/// poke <pa> <word>               raw physical word
/// map <offset> <len>             map_opaque
/// load <va> <path>               raw image bytes through `load_file`
/// fill <va> <len> <byte>         load an image of `len` copies of `byte`
/// write <va> <word>
/// read <va> <len>
/// translate <va> <read|write|exec>
/// fetch <va> <len>
/// hash                           digest of guest physical memory
/// ```
///
/// Numbers are hex with `0x` or decimal. MMU errors are part of the transcript; malformed
/// lines and unreadable files stop the run.
pub fn run_scenario(text: &str, load_file: &dyn Fn(&str) -> std::io::Result<Vec<u8>>) -> Result<String, ScenarioError> {
    let mut space = AddressSpace::with_defaults(0x4000);
    let mut out = String::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let err = |message: String| ScenarioError { line, message };
        let body = raw.split('#').next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        let words: Vec<&str> = body.split_whitespace().collect();
        let (cmd, args) = (words[0], &words[1..]);
        let want = |k: usize| if args.len() == k { Ok(()) } else { Err(err(format!("{cmd} takes {k} arguments"))) };
        let num = |i: usize| parse_num(args[i]).ok_or_else(|| err(format!("bad number {:?}", args[i])));
        let perms = |i: usize| Perms::parse(args[i]).ok_or_else(|| err(format!("bad permissions {:?}", args[i])));
        let result: Result<String, MmuError> = match cmd {
            "opaque" => {
                want(2)?;
                let ttbr = space.ttbr;
                AddressSpace::new(ttbr, num(0)?, num(1)?).map(|s| {
                    space = s;
                    "ok".into()
                })
            }
            "ttbr" => {
                want(1)?;
                space.ttbr = num(0)? & 0xffff_c000;
                Ok("ok".into())
            }
            "section" => {
                want(3)?;
                space.set_section(num(0)?, num(1)?, perms(2)?);
                Ok("ok".into())
            }
            "coarse" => {
                want(2)?;
                space.set_coarse(num(0)?, num(1)?);
                Ok("ok".into())
            }
            "page" => {
                want(3)?;
                space.set_small_page(num(0)?, num(1)?, perms(2)?).map(|_| "ok".into())
            }
            "poke" => {
                want(2)?;
                space.phys.write_word(num(0)?, num(1)?);
                Ok("ok".into())
            }
            "map" => {
                want(2)?;
                space.map_opaque(num(0)?, num(1)?).map(|_| "ok".into())
            }
            "load" => {
                want(2)?;
                let bytes = load_file(args[1]).map_err(|e| err(format!("{}: {e}", args[1])))?;
                space.load_image(num(0)?, &bytes).map(|_| format!("loaded {:#x} bytes", bytes.len()))
            }
            "fill" => {
                want(3)?;
                let image = vec![num(2)? as u8; num(1)? as usize];
                space.load_image(num(0)?, &image).map(|_| format!("loaded {:#x} bytes", image.len()))
            }
            "write" => {
                want(2)?;
                space.write(num(0)?, &num(1)?.to_le_bytes()).map(|_| "ok".into())
            }
            "read" | "fetch" => {
                want(2)?;
                let access = if cmd == "read" { Access::Read } else { Access::Exec };
                space.read(num(0)?, num(1)?, access).map(|b| b.iter().map(|x| format!("{x:02x}")).collect())
            }
            "translate" => {
                want(2)?;
                let access = match args[1] {
                    "read" => Access::Read,
                    "write" => Access::Write,
                    "exec" => Access::Exec,
                    a => return Err(err(format!("bad access {a:?}"))),
                };
                space.translate(num(0)?, access).map(|t| {
                    let src = match t.source {
                        Source::Guest => "guest",
                        Source::Hijack => "hijack",
                    };
                    format!("{src} paddr={:#010x} perms={}", t.paddr, t.perms)
                })
            }
            "hash" => {
                want(0)?;
                Ok(space.phys.digest().iter().map(|b| format!("{b:02x}")).collect())
            }
            _ => return Err(err(format!("unknown command {cmd:?}"))),
        };
        let shown = match result {
            Ok(s) => s,
            Err(MmuError::GuestFault { level, vaddr }) => format!("fault guest level={level} vaddr={vaddr:#010x}"),
            Err(MmuError::PermissionFault { vaddr, access }) => format!("fault permission access={access} vaddr={vaddr:#010x}"),
            Err(e) => format!("error {e}"),
        };
        let _ = writeln!(out, "{body} -> {shown}");
    }
    Ok(out)
}

fn parse_num(s: &str) -> Option<u32> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u32::from_str_radix(&h.replace('_', ""), 16).ok(),
        None => s.parse().ok(),
    }
}
