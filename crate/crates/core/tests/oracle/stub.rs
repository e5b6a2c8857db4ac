//! The decompressor call site with every free register choice exposed, plus shapes that must
//! not be mistaken for it.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct Regs {
    pub zero: u32,
    pub ptr: u32,
    pub end: u32,
    pub out: u32,
    pub r3_src: u32,
}

pub const VERBATIM: Regs = Regs { zero: 0, ptr: 2, end: 3, out: 4, r3_src: 7 };

pub fn stub(r: Regs) -> Vec<u32> {
    let Regs { zero, ptr, end, out, r3_src } = r;
    let str_post = 0xe480_0004 | ptr << 16 | zero << 12;
    vec![
        0xe3a0_0000 | zero << 12,
        str_post,
        str_post,
        str_post,
        str_post,
        0xe150_0000 | ptr << 16 | end,
        0x3aff_fff9,
        0xe310_0001 | out << 16,
        0xe3c0_0001 | out << 16 | out << 12,
        0x1b00_0010,
        0xe1a0_0000 | out,
        0xe1a0_100d,
        0xe28d_2801,
        0xe1a0_3000 | r3_src,
        0xeb00_0100,
    ]
}

/// Distinct registers for the loop and the output. The output has to survive the conditional
/// `bl cache_on`, so it is callee-saved.
pub fn permuted(rng: &mut ChaCha8Rng) -> Regs {
    let out = rng.gen_range(4..=11);
    let mut pool: Vec<u32> = (0..=12).filter(|&r| r != out).collect();
    pool.shuffle(rng);
    Regs { zero: pool[0], ptr: pool[1], end: pool[2], out, r3_src: rng.gen_range(0..=12) }
}

/// `ldr out, [pc, #..]` feeding the stub, then the literal.
pub fn program(r: Regs, output_start: u32) -> Vec<u32> {
    let mut ws = vec![0xe59f_0000 | r.out << 12 | (15 * 4 + 4 - 8)];
    ws.extend(stub(r));
    ws.push(output_start);
    ws
}

/// Random words, or the stub with its instructions shuffled out of order.
pub fn soup(rng: &mut ChaCha8Rng) -> Vec<u32> {
    if rng.gen_bool(0.5) {
        (0..rng.gen_range(15..256)).map(|_| rng.gen()).collect()
    } else {
        let orig = stub(permuted(rng));
        let mut s = orig.clone();
        while s == orig {
            s.shuffle(rng);
        }
        s
    }
}
