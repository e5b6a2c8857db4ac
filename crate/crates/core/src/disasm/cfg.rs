use std::collections::BTreeSet;

use serde::Serialize;

use super::decode::{Instruction, Klass};
use crate::exec::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", content = "addr", rename_all = "snake_case")]
pub enum Successor {
    Block(u32),
    /// Outside the swept range, or not 4-aligned.
    External(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BasicBlock {
    pub start: u32,
    /// Exclusive.
    pub end: u32,
    pub successors: Vec<Successor>,
}

impl BasicBlock {
    pub fn contains(&self, addr: u32) -> bool {
        (self.start..self.end).contains(&addr)
    }

    pub fn last_addr(&self) -> u32 {
        self.end - 4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CallEdge {
    pub site: u32,
    pub target: u32,
    pub external: bool,
}

/// Basic blocks over a contiguous instruction range `[base, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Cfg {
    pub base: u32,
    pub end: u32,
    /// Sorted by start, disjoint, and covering the whole range.
    pub blocks: Vec<BasicBlock>,
    pub call_edges: Vec<CallEdge>,
}

impl Cfg {
    pub fn contains(&self, addr: u32) -> bool {
        (self.base..self.end).contains(&addr)
    }

    /// Index of the block containing `addr`.
    pub fn block_index(&self, addr: u32) -> Option<usize> {
        if !self.contains(addr) {
            return None;
        }
        let i = self.blocks.partition_point(|b| b.start <= addr);
        Some(i - 1)
    }

    pub fn block_starting_at(&self, addr: u32) -> Option<&BasicBlock> {
        self.blocks.binary_search_by_key(&addr, |b| b.start).ok().map(|i| &self.blocks[i])
    }

    pub fn is_block_start(&self, addr: u32) -> bool {
        self.block_starting_at(addr).is_some()
    }

    /// Rebuilds the graph with additional leaders. Used to make every function entry a block
    /// start even when nothing branches to it.
    pub fn split_at(&self, instrs: &[Instruction], extra: impl IntoIterator<Item = u32>) -> Cfg {
        let mut leaders: BTreeSet<u32> = self.blocks.iter().map(|b| b.start).collect();
        leaders.extend(extra.into_iter().filter(|a| self.contains(*a) && a % 4 == 0));
        assemble(instrs, leaders.into_iter().collect(), self.call_edges.clone(), Execution::default())
    }
}

/// Builds the block graph of a linear sweep.
pub fn build_cfg(instrs: &[Instruction]) -> Cfg {
    build_cfg_with(instrs, Execution::default())
}

pub fn build_cfg_with(instrs: &[Instruction], exec: Execution) -> Cfg {
    let Some(first) = instrs.first() else {
        return Cfg::default();
    };
    let base = first.addr;
    let in_range = |a: u32| a >= base && (a - base) < 4 * instrs.len() as u32 && a % 4 == 0;

    let mut leaders: Vec<u32> = exec::flat_map_range(exec, 0..instrs.len(), |i| {
        let ins = &instrs[i];
        let mut out = Vec::new();
        if ins.ends_block() && i + 1 < instrs.len() {
            out.push(ins.addr + 4);
        }
        if ins.klass == Klass::BranchImm {
            out.extend(ins.branch_targets.iter().copied().filter(|t| in_range(*t)));
        }
        out
    });
    leaders.push(base);
    leaders.sort_unstable();
    leaders.dedup();

    let call_edges = instrs
        .iter()
        .filter(|i| i.is_call && i.klass == Klass::BranchImm)
        .flat_map(|i| i.branch_targets.iter().map(move |&t| CallEdge { site: i.addr, target: t, external: !in_range(t) }))
        .collect();

    assemble(instrs, leaders, call_edges, exec)
}

fn assemble(instrs: &[Instruction], leaders: Vec<u32>, call_edges: Vec<CallEdge>, exec: Execution) -> Cfg {
    let base = instrs[0].addr;
    let len = 4 * instrs.len() as u32;
    let end = base.wrapping_add(len);
    let in_range = |a: u32| a >= base && (a - base) < len && a % 4 == 0;

    let blocks = exec::map_range(exec, 0..leaders.len(), |k| {
        let start = leaders[k];
        let block_end = leaders.get(k + 1).copied().unwrap_or(end);
        let last = &instrs[((block_end - 4 - base) / 4) as usize];
        let fallthrough = || {
            if in_range(block_end) {
                Some(Successor::Block(block_end))
            } else {
                None
            }
        };
        let mut successors = Vec::new();
        match last.klass {
            Klass::BranchImm if !last.is_call => {
                for &t in &last.branch_targets {
                    successors.push(if in_range(t) { Successor::Block(t) } else { Successor::External(t) });
                }
                if last.is_conditional() {
                    successors.extend(fallthrough());
                }
            }
            Klass::BranchImm => successors.extend(fallthrough()),
            _ if last.writes_pc => {
                if last.is_call || last.is_conditional() {
                    successors.extend(fallthrough());
                }
            }
            _ => successors.extend(fallthrough()),
        }
        successors.sort_unstable();
        successors.dedup();
        BasicBlock { start, end: block_end, successors }
    });
    Cfg { base, end, blocks, call_edges }
}
