//! Brute-force reference for the short-descriptor walk: every 4 KiB page of the address space
//! is enumerated once from the raw tables, then lookups are a table index.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use rehost_core::mmu::{Access, AddressSpace, MmuError, Perms, Source, Translation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Page {
    Fault(u8),
    Mapped { frame: u32, perms: Perms },
}

/// AP[2] and AP[1:0] as seen from a privileged mode, domains as client, AFE clear.
fn perms(ap2: u32, ap10: u32, never_exec: bool) -> Perms {
    let (read, write) = match (ap2, ap10) {
        (0, 0b00) => (false, false),
        (0, _) => (true, true),
        (1, 0b00) => (false, false),
        _ => (true, false),
    };
    Perms { read, write, execute: read && !never_exec }
}

pub struct BruteForce {
    pages: Vec<Page>,
    opaque: Option<(u32, u32)>,
}

impl BruteForce {
    pub fn build(space: &AddressSpace) -> Self {
        let mut pages = Vec::with_capacity(1 << 20);
        for mb in 0..4096u32 {
            let l1 = space.phys.read_word(space.ttbr + mb * 4);
            match l1 & 3 {
                0 => pages.extend(std::iter::repeat(Page::Fault(1)).take(256)),
                1 => {
                    let pxn = (l1 >> 2) & 1 == 1;
                    let table = l1 & !0x3ff;
                    for k in 0..256 {
                        let l2 = space.phys.read_word(table + k * 4);
                        pages.push(match l2 & 3 {
                            // fault and 64 KiB large pages
                            0 | 1 => Page::Fault(2),
                            _ => Page::Mapped {
                                frame: l2 & !0xfff,
                                perms: perms((l2 >> 9) & 1, (l2 >> 4) & 3, l2 & 1 == 1 || pxn),
                            },
                        });
                    }
                }
                _ if (l1 >> 18) & 1 == 1 => pages.extend(std::iter::repeat(Page::Fault(1)).take(256)),
                _ => {
                    let p = perms((l1 >> 15) & 1, (l1 >> 10) & 3, (l1 >> 4) & 1 == 1 || l1 & 1 == 1);
                    for k in 0..256 {
                        pages.push(Page::Mapped { frame: (l1 & 0xfff0_0000) + k * 0x1000, perms: p });
                    }
                }
            }
        }
        BruteForce { pages, opaque: Some((space.opaque_base(), space.opaque_len())) }
    }

    pub fn expect(&self, vaddr: u32, access: Access) -> Result<Translation, MmuError> {
        if let Some((base, len)) = self.opaque {
            if vaddr >= base && (vaddr as u64) < base as u64 + len as u64 {
                return Ok(Translation { paddr: vaddr - base, source: Source::Hijack, perms: Perms::RWX });
            }
        }
        match self.pages[(vaddr >> 12) as usize] {
            Page::Fault(level) => Err(MmuError::GuestFault { level, vaddr }),
            Page::Mapped { perms, .. } if !perms.allows(access) => Err(MmuError::PermissionFault { vaddr, access }),
            Page::Mapped { frame, perms } => Ok(Translation { paddr: frame | (vaddr & 0xfff), source: Source::Guest, perms }),
        }
    }
}

/// A space whose L1 table has `entries` random raw descriptors, a quarter of them coarse
/// tables full of random raw small-page descriptors. Returns the megabytes touched.
pub fn random_space(rng: &mut ChaCha8Rng, entries: usize) -> (AddressSpace, Vec<u32>) {
    let mut space = AddressSpace::with_defaults(0x4000);
    let mut touched = Vec::new();
    let mut next_table = 0x0010_0000u32;
    for _ in 0..entries {
        let mb = rng.gen_range(0..4096u32);
        let desc = match rng.gen_range(0..8) {
            0 => rng.gen::<u32>() & !3,
            1 | 2 => {
                let table = next_table;
                next_table += 0x400;
                for k in 0..256 {
                    space.phys.write_word(table + k * 4, rng.gen());
                }
                table | (rng.gen::<u32>() & 0x3fc & !0x200) | 1
            }
            _ => rng.gen::<u32>() | 2,
        };
        space.phys.write_word(space.ttbr + mb * 4, desc);
        touched.push(mb);
    }
    (space, touched)
}

pub fn random_access(rng: &mut ChaCha8Rng) -> Access {
    [Access::Read, Access::Write, Access::Exec][rng.gen_range(0..3)]
}

/// Mostly addresses in megabytes that have descriptors, some in the opaque window, some anywhere.
pub fn random_vaddr(rng: &mut ChaCha8Rng, touched: &[u32], space: &AddressSpace) -> u32 {
    match rng.gen_range(0..10) {
        0 => space.opaque_base() + rng.gen_range(0..space.opaque_len()),
        1 => rng.gen(),
        _ => (touched[rng.gen_range(0..touched.len())] << 20) | rng.gen_range(0..0x10_0000),
    }
}

/// Compares `n` random translations; returns the mismatches.
pub fn compare(rng: &mut ChaCha8Rng, space: &AddressSpace, touched: &[u32], n: usize) -> Vec<String> {
    let oracle = BruteForce::build(space);
    let mut bad = Vec::new();
    for _ in 0..n {
        let v = random_vaddr(rng, touched, space);
        let a = random_access(rng);
        let (got, want) = (space.translate(v, a), oracle.expect(v, a));
        if got != want {
            bad.push(format!("{v:#010x} {a}: got {got:?}, brute force {want:?}"));
        }
    }
    bad
}
