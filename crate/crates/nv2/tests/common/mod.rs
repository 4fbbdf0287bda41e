//! Helpers shared by the integration suites.
#![allow(dead_code)]

use nv2::cantor::{BinaryWord, DyadicRect};
use nv2::element::Element;
use nv2::genset::{self, GeneratorTable, GroupWord};
use rand::rngs::StdRng;
use rand::Rng;
use std::sync::OnceLock;

pub fn table() -> &'static GeneratorTable {
    static TABLE: OnceLock<GeneratorTable> = OnceLock::new();
    TABLE.get_or_init(|| genset::load_default().expect("builtin generator table"))
}

pub fn elem_of(word: &GroupWord) -> Element {
    genset::word_to_element(word, table()).expect("word over table symbols")
}

pub fn elem(word: &str) -> Element {
    elem_of(&GroupWord::parse(word).expect("word literal"))
}

/// A uniformly random word of length up to `max_len` over the signed
/// generator symbols.
pub fn rand_word(rng: &mut StdRng, max_len: usize) -> GroupWord {
    let syms = table().symbols();
    let len = rng.gen_range(0..=max_len);
    let mut w = GroupWord::empty();
    for _ in 0..len {
        let s = &syms[rng.gen_range(0..syms.len())];
        let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
        w.push(s, sign);
    }
    w
}

fn pad_to(w: &BinaryWord, depth: u32) -> BinaryWord {
    if w.len() >= depth {
        w.clone()
    } else {
        w.concat(&BinaryWord::zeros(depth - w.len()))
    }
}

/// Exact pointwise-evaluation equality oracle. One interior point per cell
/// of the common domain refinement decides equality: on each cell both
/// maps are affine prefix replacements, so agreement at a single deep
/// interior point pins the same image rectangle. Points are padded with
/// zeros to at least `depth` bits per axis.
pub fn pointwise_equal(f: &Element, g: &Element, depth: u32) -> (bool, usize) {
    let mut cells: Vec<DyadicRect> = Vec::new();
    for (df, _) in f.pairs() {
        for (dg, _) in g.pairs() {
            if let Some(meet) = df.intersect(dg) {
                cells.push(meet);
            }
        }
    }
    cells.sort();
    cells.dedup();
    let n = cells.len();
    for c in cells {
        let u1 = pad_to(&c.w1, depth);
        let u2 = pad_to(&c.w2, depth);
        let a = f.evaluate(&u1, &u2).expect("cell point lies inside a domain piece");
        let b = g.evaluate(&u1, &u2).expect("cell point lies inside a domain piece");
        if a != b {
            return (false, n);
        }
    }
    (true, n)
}
