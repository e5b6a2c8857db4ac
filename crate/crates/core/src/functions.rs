//! Function boundary recovery and per-function features.
//!
//! Entries are seeded from direct call targets and from two prologue shapes. Each seed owns the
//! blocks reachable from it without entering another seed.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::disasm::{self, Cfg, Cond, DisasmError, DpOpcode, Instruction, Klass, MemOffset, Operand2, Operation, Successor, LR, SP};
use crate::emu::{self, ImageView, LiteralMemory, RegisterState};
use crate::exec::{self, Execution};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunctionCandidate {
    pub entry: u32,
    /// Exclusive.
    pub end: u32,
    pub bb_count: usize,
    pub callees: Vec<u32>,
    pub callers: Vec<u32>,
    pub string_refs: Vec<(u32, u32)>,
    /// Sorted, duplicates kept.
    pub immediates: Vec<u32>,
    pub return_imms: Vec<u32>,
    /// `(start, end)` of every owned block, sorted.
    #[serde(skip)]
    pub blocks: Vec<(u32, u32)>,
}

impl FunctionCandidate {
    pub fn size(&self) -> u32 {
        self.end - self.entry
    }

    /// Addresses of every owned instruction.
    pub fn instruction_addrs(&self) -> impl Iterator<Item = u32> + '_ {
        self.blocks.iter().flat_map(|&(s, e)| (s..e).step_by(4))
    }
}

const MOV_IP_SP: u32 = 0xe1a0_c00d;

/// `sub sp, sp, #imm`: variadic functions reserve the argument spill area before the push.
fn is_spill_reserve(i: &Instruction) -> bool {
    i.cond.is_always()
        && matches!(i.op, Operation::DataProc { opcode: DpOpcode::Sub, set_flags: false, rd: SP, rn: SP, op2: Operand2::Imm { .. } })
}

/// `stmdb sp!, {.., lr}` or `str lr, [sp, #-4]!`, unconditional.
fn is_prologue(i: &Instruction) -> bool {
    if !i.cond.is_always() {
        return false;
    }
    match i.op {
        Operation::Multiple { load: false, rn: SP, regs, increment: false, before: true, writeback: true, user: false } => {
            regs & (1 << LR) != 0
        }
        Operation::Single {
            load: false,
            byte: false,
            rt: LR,
            rn: SP,
            offset: MemOffset::Imm(4),
            pre: true,
            up: false,
            writeback: true,
        } => true,
        _ => false,
    }
}

/// Direct in-image call targets plus prologue addresses.
pub fn seed_entries(cfg: &Cfg, instrs: &[Instruction]) -> BTreeSet<u32> {
    seed_entries_with(cfg, instrs, Execution::default())
}

pub fn seed_entries_with(cfg: &Cfg, instrs: &[Instruction], exec: Execution) -> BTreeSet<u32> {
    let mut seeds: BTreeSet<u32> = cfg
        .call_edges
        .iter()
        .filter(|e| !e.external && e.target % 4 == 0)
        .map(|e| e.target)
        .collect();
    let prologues = exec::flat_map_range(exec, 0..instrs.len(), |k| {
        if !is_prologue(&instrs[k]) {
            return Vec::new();
        }
        // APCS frames copy sp into ip one instruction before the push.
        match k.checked_sub(1).map(|p| &instrs[p]) {
            Some(prev) if prev.word == MOV_IP_SP || is_spill_reserve(prev) => vec![prev.addr],
            _ => vec![instrs[k].addr],
        }
    });
    seeds.extend(prologues);
    seeds
}

/// Words read by pc-relative loads. Flow that falls into one has left the function, typically
/// past a call that does not return.
pub fn literal_slots(instrs: &[Instruction]) -> BTreeSet<u32> {
    instrs.iter().filter_map(|i| i.literal_ref).filter(|a| a % 4 == 0).collect()
}

/// Assigns blocks to seeds and aggregates features. `cfg` must already have every seed as a
/// block start, and should have every [`literal_slots`] address as one too; use
/// [`Cfg::split_at`] or [`KernelAnalysis`] otherwise.
pub fn delimit_functions(cfg: &Cfg, instrs: &[Instruction], seeds: &BTreeSet<u32>, mem: Option<&dyn LiteralMemory>) -> Vec<FunctionCandidate> {
    delimit_functions_with(cfg, instrs, seeds, mem, Execution::default())
}

pub fn delimit_functions_with(
    cfg: &Cfg,
    instrs: &[Instruction],
    seeds: &BTreeSet<u32>,
    mem: Option<&dyn LiteralMemory>,
    exec: Execution,
) -> Vec<FunctionCandidate> {
    if instrs.is_empty() {
        return Vec::new();
    }
    let entries: Vec<u32> = seeds.iter().copied().filter(|&s| cfg.is_block_start(s)).collect();
    let literals = literal_slots(instrs);
    let mut out = exec::map_slice(exec, &entries, |&entry| delimit_one(cfg, instrs, seeds, &literals, entry, mem));

    let index: HashMap<u32, usize> = out.iter().enumerate().map(|(i, f)| (f.entry, i)).collect();
    let mut callers: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); out.len()];
    for f in &out {
        for c in &f.callees {
            if let Some(&j) = index.get(c) {
                callers[j].insert(f.entry);
            }
        }
    }
    for (f, c) in out.iter_mut().zip(callers) {
        f.callers = c.into_iter().collect();
    }
    out
}

fn instr_at<'a>(cfg: &Cfg, instrs: &'a [Instruction], addr: u32) -> &'a Instruction {
    &instrs[((addr - cfg.base) / 4) as usize]
}

fn block_instrs<'a>(cfg: &Cfg, instrs: &'a [Instruction], (start, end): (u32, u32)) -> &'a [Instruction] {
    let lo = ((start - cfg.base) / 4) as usize;
    let hi = ((end - cfg.base) / 4) as usize;
    &instrs[lo..hi]
}

fn delimit_one(
    cfg: &Cfg,
    instrs: &[Instruction],
    seeds: &BTreeSet<u32>,
    literals: &BTreeSet<u32>,
    entry: u32,
    mem: Option<&dyn LiteralMemory>,
) -> FunctionCandidate {
    let mut owned: BTreeSet<usize> = BTreeSet::new();
    let mut stack = vec![cfg.block_index(entry).expect("entry is a block start")];
    while let Some(b) = stack.pop() {
        if !owned.insert(b) {
            continue;
        }
        for s in &cfg.blocks[b].successors {
            if let Successor::Block(a) = *s {
                if a != entry && (seeds.contains(&a) || literals.contains(&a)) {
                    continue;
                }
                if let Some(n) = cfg.block_index(a) {
                    if !owned.contains(&n) {
                        stack.push(n);
                    }
                }
            }
        }
    }

    let blocks: Vec<(u32, u32)> = owned.iter().map(|&b| (cfg.blocks[b].start, cfg.blocks[b].end)).collect();
    let end = blocks.iter().map(|b| b.1).max().unwrap();

    let mut callees = BTreeSet::new();
    let mut immediates = Vec::new();
    for &span in &blocks {
        for i in block_instrs(cfg, instrs, span) {
            if i.is_call && i.klass == Klass::BranchImm {
                callees.extend(i.branch_targets.iter().copied().filter(|&t| cfg.contains(t) && t % 4 == 0));
            }
            immediates.extend_from_slice(&i.immediates);
            // a literal-pool load is how wide constants reach a register
            if let (Some(lit), Some(mem)) = (i.literal_ref, mem) {
                if let Some(v) = mem.read_word(lit) {
                    immediates.push(v);
                }
            }
        }
    }
    immediates.sort_unstable();

    let return_imms = return_values(cfg, instrs, &owned, mem);

    FunctionCandidate {
        entry,
        end,
        bb_count: blocks.len(),
        callees: callees.into_iter().collect(),
        callers: Vec::new(),
        string_refs: Vec::new(),
        immediates,
        return_imms,
        blocks,
    }
}

/// Values of r0 at every owned return. A return block that leaves r0 unknown on its own is
/// retried along short acyclic predecessor chains inside the function.
fn return_values(cfg: &Cfg, instrs: &[Instruction], owned: &BTreeSet<usize>, mem: Option<&dyn LiteralMemory>) -> Vec<u32> {
    let mut preds: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &p in owned {
        for s in &cfg.blocks[p].successors {
            if let Successor::Block(t) = s {
                if let Some(b) = cfg.block_index(*t).filter(|b| owned.contains(b)) {
                    preds.entry(b).or_default().push(p);
                }
            }
        }
    }
    let mut values = BTreeSet::new();
    for &b in owned {
        let block = &cfg.blocks[b];
        if !instr_at(cfg, instrs, block.last_addr()).is_return() {
            continue;
        }
        let body = assume_return_taken(block_instrs(cfg, instrs, (block.start, block.end)));
        let mut budget = RETURN_PATH_BUDGET;
        let mut chain = vec![b];
        trace_return(cfg, instrs, &preds, &body, &mut chain, mem, &mut budget, &mut values);
    }
    values.into_iter().collect()
}

const RETURN_PATH_DEPTH: usize = 4;
const RETURN_PATH_BUDGET: usize = 64;

/// `chain` runs from the earliest block to the return block, whose (rewritten) body is `body`.
#[allow(clippy::too_many_arguments)]
fn trace_return(
    cfg: &Cfg,
    instrs: &[Instruction],
    preds: &BTreeMap<usize, Vec<usize>>,
    body: &[Instruction],
    chain: &mut Vec<usize>,
    mem: Option<&dyn LiteralMemory>,
    budget: &mut usize,
    out: &mut BTreeSet<u32>,
) {
    if *budget == 0 {
        return;
    }
    *budget -= 1;
    let mut st = RegisterState::unknown();
    for &p in &chain[..chain.len() - 1] {
        let blk = &cfg.blocks[p];
        st = emu::run_block(block_instrs(cfg, instrs, (blk.start, blk.end)), st, mem);
    }
    if let Some(v) = emu::run_block(body, st, mem).get(0).known() {
        out.insert(v);
        return;
    }
    if chain.len() > RETURN_PATH_DEPTH {
        return;
    }
    for &p in preds.get(&chain[0]).map(|v| &v[..]).unwrap_or(&[]) {
        if chain.contains(&p) {
            continue;
        }
        chain.insert(0, p);
        trace_return(cfg, instrs, preds, body, chain, mem, budget, out);
        chain.remove(0);
    }
}

/// For a block ending in a conditional return, the straight-line code of the path on which the
/// return happens: after the last flag update, instructions under the return's condition run
/// unconditionally and those under its inverse are dropped.
fn assume_return_taken(body: &[Instruction]) -> Vec<Instruction> {
    let Some(last) = body.last() else {
        return Vec::new();
    };
    if !last.is_conditional() {
        return body.to_vec();
    }
    let cond = last.cond;
    let sets_flags = |i: &Instruction| match i.op {
        Operation::DataProc { set_flags, opcode, .. } => set_flags || opcode.is_test(),
        Operation::Status { dest: None } | Operation::Undecodable => true,
        _ => i.is_call,
    };
    let from = body.iter().rposition(sets_flags).map_or(0, |k| k + 1);
    let mut out = body[..from].to_vec();
    for i in &body[from..] {
        if i.cond == cond {
            out.push(Instruction { cond: Cond::AL, ..i.clone() });
        } else if i.cond.0 == cond.0 ^ 1 {
            continue;
        } else {
            out.push(i.clone());
        }
    }
    out
}

fn is_printable(b: u8) -> bool {
    // 0x01 is the kernel's log-level prefix byte.
    matches!(b, 0x20..=0x7e | b'\t' | b'\n' | b'\r' | 0x01)
}

/// Every maximal run of at least four printable bytes that is terminated by NUL.
pub fn extract_string_table(blob: &[u8], base: u32) -> BTreeMap<u32, String> {
    let mut table = BTreeMap::new();
    let mut start = None;
    for (i, &b) in blob.iter().enumerate() {
        if is_printable(b) {
            start.get_or_insert(i);
            continue;
        }
        if let Some(s) = start.take() {
            if b == 0 && i - s >= 4 {
                let text = String::from_utf8_lossy(&blob[s..i]).into_owned();
                table.insert(base.wrapping_add(s as u32), text);
            }
        }
    }
    table
}

/// Whether `addr` falls on a character of a recorded string. The terminator is excluded: a
/// function whose first byte is zero may directly follow printable literal words.
pub fn inside_string(strings: &BTreeMap<u32, String>, addr: u32) -> bool {
    strings.range(..=addr).next_back().is_some_and(|(&start, s)| ((addr - start) as usize) < s.len())
}

/// Fills `string_refs` through literal slots whose value is a string address.
pub fn resolve_string_xrefs(
    candidates: Vec<FunctionCandidate>,
    instrs: &[Instruction],
    blob: &[u8],
    base: u32,
    strings: &BTreeMap<u32, String>,
) -> Vec<FunctionCandidate> {
    resolve_string_xrefs_with(candidates, instrs, blob, base, strings, Execution::default())
}

pub fn resolve_string_xrefs_with(
    candidates: Vec<FunctionCandidate>,
    instrs: &[Instruction],
    blob: &[u8],
    base: u32,
    strings: &BTreeMap<u32, String>,
    exec: Execution,
) -> Vec<FunctionCandidate> {
    let view = ImageView::new(base, blob);
    let first = instrs.first().map_or(base, |i| i.addr);
    let refs = exec::map_slice(exec, &candidates, |f| {
        f.instruction_addrs()
            .filter_map(|a| instrs.get(((a - first) / 4) as usize))
            .filter_map(|i| {
                let value = view.read_word(i.literal_ref?)?;
                strings.contains_key(&value).then_some((i.addr, value))
            })
            .collect::<Vec<_>>()
    });
    candidates
        .into_iter()
        .zip(refs)
        .map(|(mut f, r)| {
            f.string_refs = r;
            f
        })
        .collect()
}

/// Everything the identification stage needs from one kernel image.
#[derive(Debug, Clone)]
pub struct KernelAnalysis {
    pub base: u32,
    pub bytes: Vec<u8>,
    pub instrs: Vec<Instruction>,
    /// Block graph with every function entry as a leader.
    pub cfg: Cfg,
    pub functions: Vec<FunctionCandidate>,
    pub strings: BTreeMap<u32, String>,
    by_entry: HashMap<u32, usize>,
}

impl KernelAnalysis {
    pub fn new(bytes: Vec<u8>, base: u32) -> Result<Self, DisasmError> {
        Self::new_with(bytes, base, Execution::default())
    }

    /// Trailing bytes beyond the last whole word are kept in `bytes` but not disassembled.
    pub fn new_with(bytes: Vec<u8>, base: u32, exec: Execution) -> Result<Self, DisasmError> {
        let code = &bytes[..bytes.len() & !3];
        let instrs = disasm::linear_sweep_with(code, base, exec)?;
        let raw = disasm::build_cfg_with(&instrs, exec);
        let strings = extract_string_table(&bytes, base);
        let mut seeds = seed_entries_with(&raw, &instrs, exec);
        // data that happens to decode as a BL can point anywhere, strings included
        seeds.retain(|&s| !inside_string(&strings, s));
        let cfg = raw.split_at(&instrs, seeds.iter().copied().chain(literal_slots(&instrs)));
        let view = ImageView::new(base, &bytes);
        let functions = delimit_functions_with(&cfg, &instrs, &seeds, Some(&view), exec);
        let functions = resolve_string_xrefs_with(functions, &instrs, &bytes, base, &strings, exec);
        let by_entry = functions.iter().enumerate().map(|(i, f)| (f.entry, i)).collect();
        Ok(KernelAnalysis { base, bytes, instrs, cfg, functions, strings, by_entry })
    }

    pub fn function(&self, entry: u32) -> Option<&FunctionCandidate> {
        self.by_entry.get(&entry).map(|&i| &self.functions[i])
    }

    pub fn instr(&self, addr: u32) -> Option<&Instruction> {
        let off = addr.checked_sub(self.base)?;
        if off % 4 != 0 {
            return None;
        }
        self.instrs.get((off / 4) as usize)
    }

    pub fn view(&self) -> ImageView<'_> {
        ImageView::new(self.base, &self.bytes)
    }

    pub fn read_word(&self, addr: u32) -> Option<u32> {
        self.view().read_word(addr)
    }

    pub fn string_at(&self, addr: u32) -> Option<&str> {
        self.strings.get(&addr).map(String::as_str)
    }

    /// The owned instructions of block `(start, end)`.
    pub fn block_instrs(&self, span: (u32, u32)) -> &[Instruction] {
        block_instrs(&self.cfg, &self.instrs, span)
    }

    /// Instructions of `f` in address order.
    pub fn instrs_of<'a>(&'a self, f: &'a FunctionCandidate) -> impl Iterator<Item = &'a Instruction> + 'a {
        f.blocks.iter().flat_map(move |&span| self.block_instrs(span).iter())
    }
}
