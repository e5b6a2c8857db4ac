//! Resolving catalogued kernel functions in a stripped image.
//!
//! Every applicable spec starts with all function candidates. Lexical and structural filters
//! depend only on the image and run once. Relational filters depend on what is already
//! resolved, so they rerun in rounds: each round reads a snapshot of the resolutions, and new
//! resolutions are committed together at the end of the round. A spec resolves when exactly one
//! candidate survives and none of its relations is still waiting on an anchor.

mod catalog;

pub use catalog::{
    family_matches, CatalogError, Lexical, Lines, PointerCatalog, PointerKind, PointerSpec, Relation, RelationKind, Signature,
    Strategy, Structural, Variant, VersionProfile, VersionSet, Warning,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emu::{self, LiteralMemory, RegisterState};
use crate::exec::{self, Execution};
use crate::functions::{FunctionCandidate, KernelAnalysis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub address: u32,
    pub strategy_used: Strategy,
    pub candidates_considered: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Unresolved {
    NoCandidate,
    Ambiguous { count: usize },
    /// A relational anchor or base function never resolved.
    UnresolvedAnchor { anchors: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ResolvedCatalog {
    pub version: Option<String>,
    pub resolutions: BTreeMap<String, Resolution>,
    pub unresolved: BTreeMap<String, Unresolved>,
}

impl ResolvedCatalog {
    pub fn address_of(&self, name: &str) -> Option<u32> {
        self.resolutions.get(name).map(|r| r.address)
    }
}

/// The machine descriptor is `r0` after `base_function` returns; the slot lives at
/// `machine_desc + slot_offset` (dereferenced once more when `indirect`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecipe {
    pub name: String,
    pub base_function: String,
    pub base_address: u32,
    pub slot_offset: u32,
    #[serde(default)]
    pub indirect: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdentifyError {
    #[error("neither setup_machine_fdt nor lookup_machine_type is resolved")]
    MissingAnchor,
    #[error("no version profile for kernel version {0:?}")]
    NoProfile(Option<String>),
}

/// Values `c` may appear as in an instruction stream: itself, and for negative values the
/// `MVN` operand and the `RSB`/`SUB` magnitude.
fn encodings(c: i64) -> Vec<u32> {
    let v = c as u32;
    let mut out = vec![v];
    if (v as i32) < 0 {
        out.push(!v);
        out.push(v.wrapping_neg());
    }
    out
}

/// Whether every spec string occurs inside a string the candidate references.
pub fn filter_lexical(lex: &Lexical, cand: &FunctionCandidate, analysis: &KernelAnalysis) -> bool {
    let referenced: Vec<&str> = cand.string_refs.iter().filter_map(|&(_, s)| analysis.string_at(s)).collect();
    if !lex.strings.iter().all(|want| referenced.iter().any(|s| s.contains(want.as_str()))) {
        return false;
    }
    match &lex.warning {
        None => true,
        Some(w) => warning_sites(cand, analysis).any(|args| warning_matches(w, &args, analysis)),
    }
}

/// Argument registers r0-r3 at every direct call in `cand`, from the block prefix before it.
fn warning_sites<'a>(cand: &'a FunctionCandidate, analysis: &'a KernelAnalysis) -> impl Iterator<Item = [Option<u32>; 4]> + 'a {
    let view = analysis.view();
    cand.blocks.iter().filter_map(move |&span| {
        let body = analysis.block_instrs(span);
        let (last, prefix) = body.split_last()?;
        if !last.is_call {
            return None;
        }
        let st = emu::run_block(prefix, RegisterState::unknown(), Some(&view as &dyn LiteralMemory));
        Some([0u8, 1, 2, 3].map(|r| st.get(r).known()))
    })
}

fn warning_matches(w: &Warning, args: &[Option<u32>; 4], analysis: &KernelAnalysis) -> bool {
    (0..4).any(|i| {
        let file_ok = args[i].and_then(|a| analysis.string_at(a)).is_some_and(|s| s.contains(w.file.as_str()));
        file_ok && (0..4).any(|j| j != i && args[j].is_some_and(|v| w.line.contains(v)))
    })
}

/// Whether every specified structural check holds.
pub fn filter_structural(st: &Structural, cand: &FunctionCandidate) -> bool {
    let consts_ok = st.constants.iter().all(|&c| encodings(c).iter().any(|e| cand.immediates.binary_search(e).is_ok()));
    let rets_ok = st.return_values.iter().all(|&r| cand.return_imms.contains(&(r as u32)));
    consts_ok
        && rets_ok
        && st.bb_count.map_or(true, |n| cand.bb_count == n)
        && st.callee_count.map_or(true, |n| cand.callees.len() == n)
}

/// Outcome of a relational check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tri {
    True,
    False,
    /// The anchor is not resolved yet.
    Indeterminate,
}

/// Evaluates every relation; any unresolved anchor makes the result indeterminate unless a
/// resolved one already fails.
pub fn filter_relational(rels: &[Relation], cand: &FunctionCandidate, resolved: &BTreeMap<String, u32>, analysis: &KernelAnalysis) -> Tri {
    let mut pending = false;
    for r in rels {
        let Some(&anchor) = resolved.get(&r.other) else {
            pending = true;
            continue;
        };
        let holds = match r.relation {
            RelationKind::Caller => cand.callees.contains(&anchor),
            RelationKind::Callee => cand.callers.contains(&anchor),
            RelationKind::Sibling => {
                anchor != cand.entry
                    && analysis.function(anchor).is_some_and(|a| a.callers.iter().any(|c| cand.callers.binary_search(c).is_ok()))
            }
        };
        if !holds {
            return Tri::False;
        }
    }
    if pending {
        Tri::Indeterminate
    } else {
        Tri::True
    }
}

/// Per-spec working state.
#[derive(Debug, Clone)]
struct Work<'c> {
    spec: &'c PointerSpec,
    /// Survivors of the lexical filter alone.
    lexical: Vec<usize>,
    /// Survivors of every filter applied so far.
    current: Vec<usize>,
}

pub fn identify_pointers(analysis: &KernelAnalysis, catalog: &PointerCatalog, version: Option<&str>) -> ResolvedCatalog {
    identify_pointers_with(analysis, catalog, version, Execution::default())
}

pub fn identify_pointers_with(analysis: &KernelAnalysis, catalog: &PointerCatalog, version: Option<&str>, exec: Execution) -> ResolvedCatalog {
    let mut specs: Vec<&PointerSpec> = catalog.pointer.iter().filter(|p| p.applies_to(version)).collect();
    specs.sort_by(|a, b| a.name.cmp(&b.name));
    let functions = &analysis.functions;
    let total = functions.len();

    let function_specs: Vec<&PointerSpec> = specs.iter().copied().filter(|p| p.kind == PointerKind::Function).collect();
    let mut work: Vec<Work> = exec::map_slice(exec, &function_specs, |spec| {
        let sig = spec.signature_for(version);
        let lexical: Vec<usize> = (0..total)
            .filter(|&i| sig.lexical.map_or(true, |l| filter_lexical(l, &functions[i], analysis)))
            .collect();
        let current = lexical
            .iter()
            .copied()
            .filter(|&i| sig.structural.map_or(true, |s| filter_structural(s, &functions[i])))
            .collect();
        Work { spec, lexical, current }
    });

    let mut resolved: BTreeMap<String, u32> = BTreeMap::new();
    let mut out = ResolvedCatalog { version: version.map(str::to_string), ..Default::default() };
    loop {
        let snapshot = &resolved;
        let rounds = exec::map_slice(exec, &work, |w| {
            if snapshot.contains_key(&w.spec.name) {
                return (w.current.clone(), false);
            }
            let rels = w.spec.signature_for(version).relational;
            let mut pending = false;
            let kept: Vec<usize> = w
                .current
                .iter()
                .copied()
                .filter(|&i| match filter_relational(rels, &functions[i], snapshot, analysis) {
                    Tri::True => true,
                    Tri::False => false,
                    Tri::Indeterminate => {
                        pending = true;
                        true
                    }
                })
                .collect();
            // An indeterminate verdict on one candidate means some anchor is missing for all.
            let pending = pending || rels.iter().any(|r| !snapshot.contains_key(&r.other));
            (kept, pending)
        });
        let mut committed = Vec::new();
        for (w, (kept, pending)) in work.iter_mut().zip(rounds) {
            if resolved.contains_key(&w.spec.name) {
                continue;
            }
            w.current = kept;
            if !pending && w.current.len() == 1 {
                committed.push((w.spec.name.clone(), functions[w.current[0]].entry));
            }
        }
        if committed.is_empty() {
            break;
        }
        resolved.extend(committed);
    }

    for w in &work {
        let sig = w.spec.signature_for(version);
        match resolved.get(&w.spec.name) {
            Some(&address) => {
                let strategy_used = attribute(w, sig, &resolved, analysis);
                out.resolutions.insert(w.spec.name.clone(), Resolution { address, strategy_used, candidates_considered: total });
            }
            None => {
                let missing: Vec<String> = sig.relational.iter().map(|r| r.other.clone()).filter(|o| !resolved.contains_key(o)).collect();
                let reason = if !missing.is_empty() && !w.current.is_empty() {
                    Unresolved::UnresolvedAnchor { anchors: dedup(missing) }
                } else if w.current.is_empty() {
                    Unresolved::NoCandidate
                } else {
                    Unresolved::Ambiguous { count: w.current.len() }
                };
                out.unresolved.insert(w.spec.name.clone(), reason);
            }
        }
    }

    for spec in specs.iter().filter(|p| p.kind == PointerKind::DataViaReturn) {
        let base = spec.base.iter().filter(|b| catalog.get(b).is_some_and(|p| p.applies_to(version))).find_map(|b| out.resolutions.get(b));
        match base {
            Some(r) => {
                out.resolutions.insert(spec.name.clone(), *r);
            }
            None => {
                out.unresolved.insert(spec.name.clone(), Unresolved::UnresolvedAnchor { anchors: spec.base.clone() });
            }
        }
    }
    out
}

fn dedup(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v.dedup();
    v
}

/// First stage, in lexical → relational → structural order, after which one candidate remains.
fn attribute(w: &Work, sig: Signature, resolved: &BTreeMap<String, u32>, analysis: &KernelAnalysis) -> Strategy {
    if sig.lexical.is_some() && w.lexical.len() == 1 {
        return Strategy::I;
    }
    let functions = &analysis.functions;
    let after_rel = w
        .lexical
        .iter()
        .filter(|&&i| filter_relational(sig.relational, &functions[i], resolved, analysis) != Tri::False)
        .count();
    if !sig.relational.is_empty() && after_rel == 1 {
        return Strategy::II;
    }
    if sig.structural.is_some() {
        return Strategy::III;
    }
    if sig.relational.is_empty() {
        Strategy::I
    } else {
        Strategy::II
    }
}

/// Recipes for the two board-callback slots of `struct machine_desc`.
pub fn derive_data_slots(resolved: &ResolvedCatalog, catalog: &PointerCatalog) -> Result<Vec<SlotRecipe>, IdentifyError> {
    let version = resolved.version.as_deref();
    let (_, profile) = catalog.profile_for(version).ok_or_else(|| IdentifyError::NoProfile(resolved.version.clone()))?;
    let candidates = [profile.anchor.as_str(), "setup_machine_fdt", "lookup_machine_type"];
    let (base_function, base_address) = candidates
        .iter()
        .find_map(|n| resolved.address_of(n).map(|a| (n.to_string(), a)))
        .ok_or(IdentifyError::MissingAnchor)?;
    Ok(vec![
        SlotRecipe { name: "init_irq".into(), base_function: base_function.clone(), base_address, slot_offset: profile.init_irq, indirect: false },
        SlotRecipe { name: "init_time".into(), base_function, base_address, slot_offset: profile.init_time, indirect: profile.init_time_indirect },
    ])
}
