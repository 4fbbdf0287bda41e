//! Colored binary trees, tree pairs, minimal pairs, and word decompositions.
//!
//! A caret colored `a` splits a rectangle vertically (first coordinate),
//! a caret colored `b` horizontally. A colored tree therefore describes a
//! pattern together with a left-to-right numbering of its rectangles, and a
//! pair of trees with a leaf bijection describes a group element.
//!
//! The module also straightens a tree into the right all-`a` spine,
//! producing positive words of the shape `C_{m1} .. C_{mp} W_{i1} .. W_{ir}`
//! (strictly increasing block indices, the `W_i` blocks on `{A_i, B_i}`),
//! which combine with a permutation word into the `P Pi Q^-1` form.

use crate::cantor::{Axis, BinaryWord, DyadicRect, Pattern};
use crate::element::Element;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum TreeAlgError {
    #[error("pattern cannot be produced by a colored tree")]
    NotRealizable,
    #[error("search budget exhausted before a representable target was found")]
    BudgetExceeded,
    #[error("word is not in decomposition shape: {0}")]
    MalformedWord(String),
    #[error("invalid tree pair: {0}")]
    InvalidPair(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Caret color: `A` splits the first coordinate, `B` the second.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Color {
    A,
    B,
}

impl Color {
    fn axis(self) -> Axis {
        match self {
            Color::A => Axis::Vertical,
            Color::B => Axis::Horizontal,
        }
    }
}

/// A binary tree whose internal nodes (carets) are colored.
#[derive(Clone, PartialEq, Eq)]
pub enum ColoredTree {
    Leaf,
    Caret {
        color: Color,
        left: Box<ColoredTree>,
        right: Box<ColoredTree>,
    },
}

impl ColoredTree {
    #[must_use]
    pub fn caret(color: Color, left: ColoredTree, right: ColoredTree) -> Self {
        ColoredTree::Caret { color, left: Box::new(left), right: Box::new(right) }
    }

    /// The right all-`a` spine with `n` leaves.
    #[must_use]
    pub fn spine(n: usize) -> Self {
        assert!(n >= 1);
        let mut t = ColoredTree::Leaf;
        for _ in 1..n {
            t = ColoredTree::caret(Color::A, ColoredTree::Leaf, t);
        }
        t
    }

    /// The spine with `n` leaves, with an extra caret of `color` at leaf `k`:
    /// `k` leading spine carets, then the extra caret either terminates the
    /// branch (k = n-1) or hangs off to the left of the remaining spine.
    #[must_use]
    pub fn spine_with_caret(n: usize, k: usize, color: Color) -> Self {
        assert!(k < n);
        let extra = ColoredTree::caret(color, ColoredTree::Leaf, ColoredTree::Leaf);
        let mut t = if k == n - 1 {
            extra
        } else {
            let mut tail = ColoredTree::Leaf;
            for _ in k + 2..n {
                tail = ColoredTree::caret(Color::A, ColoredTree::Leaf, tail);
            }
            ColoredTree::caret(Color::A, extra, tail)
        };
        for _ in 0..k {
            t = ColoredTree::caret(Color::A, ColoredTree::Leaf, t);
        }
        t
    }

    #[must_use]
    pub fn is_leaf(&self) -> bool {
        matches!(self, ColoredTree::Leaf)
    }

    #[must_use]
    pub fn leaf_count(&self) -> usize {
        match self {
            ColoredTree::Leaf => 1,
            ColoredTree::Caret { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    #[must_use]
    pub fn caret_count(&self) -> usize {
        self.leaf_count() - 1
    }

    /// Maximum branch length (carets along the longest root-to-leaf path).
    #[must_use]
    pub fn depth(&self) -> u32 {
        match self {
            ColoredTree::Leaf => 0,
            ColoredTree::Caret { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn parse(s: &str) -> Result<Self, TreeAlgError> {
        let bytes = s.trim().as_bytes();
        let (t, used) = Self::parse_at(bytes, 0)?;
        if used != bytes.len() {
            return Err(TreeAlgError::Parse(format!("trailing input at byte {used}")));
        }
        Ok(t)
    }

    fn parse_at(b: &[u8], at: usize) -> Result<(Self, usize), TreeAlgError> {
        match b.get(at) {
            Some(b'.') => Ok((ColoredTree::Leaf, at + 1)),
            Some(c @ (b'a' | b'b')) => {
                let color = if *c == b'a' { Color::A } else { Color::B };
                if b.get(at + 1) != Some(&b'(') {
                    return Err(TreeAlgError::Parse(format!("expected '(' at byte {}", at + 1)));
                }
                let (left, next) = Self::parse_at(b, at + 2)?;
                let (right, next) = Self::parse_at(b, next)?;
                if b.get(next) != Some(&b')') {
                    return Err(TreeAlgError::Parse(format!("expected ')' at byte {next}")));
                }
                Ok((ColoredTree::caret(color, left, right), next + 1))
            }
            other => Err(TreeAlgError::Parse(format!("unexpected input {other:?} at byte {at}"))),
        }
    }
}

impl fmt::Display for ColoredTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColoredTree::Leaf => write!(f, "."),
            ColoredTree::Caret { color, left, right } => {
                let c = if *color == Color::A { 'a' } else { 'b' };
                write!(f, "{c}({left}{right})")
            }
        }
    }
}

impl fmt::Debug for ColoredTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// The pattern of a tree, plus its rectangles in left-to-right leaf order.
#[must_use]
pub fn tree_to_pattern(t: &ColoredTree) -> (Pattern, Vec<DyadicRect>) {
    let mut leaves = Vec::with_capacity(t.leaf_count());
    let mut cur = DyadicRect::unit();
    walk(t, &mut cur, &mut leaves);
    fn walk(t: &ColoredTree, cur: &mut DyadicRect, out: &mut Vec<DyadicRect>) {
        match t {
            ColoredTree::Leaf => out.push(cur.clone()),
            ColoredTree::Caret { color, left, right } => {
                let (lo, hi) = cur.split(color.axis());
                *cur = lo;
                walk(left, cur, out);
                *cur = hi;
                walk(right, cur, out);
                *cur = cur.clone(); // restored by caller
            }
        }
    }
    let p = Pattern::new(leaves.clone()).expect("tree leaves partition the square");
    (p, leaves)
}

/// A colored tree realizing the pattern. Splits greedily on the full line
/// x = 1/2 when no rectangle crosses it, else on y = 1/2; ties prefer the
/// vertical split.
pub fn pattern_to_tree(p: &Pattern) -> Result<ColoredTree, TreeAlgError> {
    fn build(rects: &[(BinaryWord, BinaryWord)]) -> Result<ColoredTree, TreeAlgError> {
        if rects.len() == 1 {
            let (w1, w2) = &rects[0];
            if w1.is_empty() && w2.is_empty() {
                return Ok(ColoredTree::Leaf);
            }
            return Err(TreeAlgError::NotRealizable);
        }
        let axis = if rects.iter().all(|(w1, _)| !w1.is_empty()) {
            Axis::Vertical
        } else if rects.iter().all(|(_, w2)| !w2.is_empty()) {
            Axis::Horizontal
        } else {
            return Err(TreeAlgError::NotRealizable);
        };
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for (w1, w2) in rects {
            let (w, keep) = match axis {
                Axis::Vertical => (w1, w2),
                Axis::Horizontal => (w2, w1),
            };
            let stripped = w.slice(1, w.len());
            let pair = match axis {
                Axis::Vertical => (stripped, keep.clone()),
                Axis::Horizontal => (keep.clone(), stripped),
            };
            if w.get(0) == 0 {
                lo.push(pair);
            } else {
                hi.push(pair);
            }
        }
        let color = if axis == Axis::Vertical { Color::A } else { Color::B };
        Ok(ColoredTree::caret(color, build(&lo)?, build(&hi)?))
    }
    let rects: Vec<_> = p.rects().iter().map(|r| (r.w1.clone(), r.w2.clone())).collect();
    build(&rects)
}

/// A pair of colored trees with a leaf bijection: source leaf `j` maps onto
/// target leaf `perm[j]`.
#[derive(Clone, Debug)]
pub struct TreePair {
    pub source: ColoredTree,
    pub target: ColoredTree,
    pub perm: Vec<usize>,
}

impl TreePair {
    pub fn new(source: ColoredTree, target: ColoredTree, perm: Vec<usize>) -> Result<Self, TreeAlgError> {
        let n = source.leaf_count();
        if target.leaf_count() != n {
            return Err(TreeAlgError::InvalidPair("leaf counts differ".into()));
        }
        if perm.len() != n {
            return Err(TreeAlgError::InvalidPair("permutation length mismatch".into()));
        }
        let mut seen = vec![false; n];
        for &v in &perm {
            if v >= n || seen[v] {
                return Err(TreeAlgError::InvalidPair("not a bijection".into()));
            }
            seen[v] = true;
        }
        Ok(TreePair { source, target, perm })
    }

    #[must_use]
    pub fn identity() -> Self {
        TreePair { source: ColoredTree::Leaf, target: ColoredTree::Leaf, perm: vec![0] }
    }

    /// The element mapping each source leaf rectangle affinely onto its
    /// numbered target leaf rectangle.
    #[must_use]
    pub fn to_element(&self) -> Element {
        let (_, src) = tree_to_pattern(&self.source);
        let (_, tgt) = tree_to_pattern(&self.target);
        let pairs = src
            .into_iter()
            .enumerate()
            .map(|(j, d)| (d, tgt[self.perm[j]].clone()))
            .collect();
        Element::new(pairs).expect("tree pair leaves partition both squares")
    }
}

/// Search target patterns in increasing (depth, rectangle count) order for
/// one whose rectangles all pull back to single dyadic rectangles under `g`,
/// and return the induced tree pair. The first hit is a minimal pair.
pub fn minimal_pair(g: &Element, budget_depth: u32) -> Result<TreePair, TreeAlgError> {
    const POP_CAP: usize = 200_000;
    let inv = g.inverse();
    let mut heap: BinaryHeap<Reverse<(u32, usize, u64)>> = BinaryHeap::new();
    let mut store: HashMap<u64, Vec<DyadicRect>> = HashMap::new();
    let mut visited: HashSet<String> = HashSet::new();
    let mut seq = 0u64;
    let start = vec![DyadicRect::unit()];
    heap.push(Reverse((0, 1, seq)));
    store.insert(seq, start);
    let mut popped = 0usize;
    while let Some(Reverse((fineness, count, id))) = heap.pop() {
        let rects = store.remove(&id).unwrap();
        popped += 1;
        if popped > POP_CAP {
            return Err(TreeAlgError::BudgetExceeded);
        }
        let key: String = rects.iter().map(|r| format!("{r};")).collect();
        if !visited.insert(key) {
            continue;
        }
        let mut failing = None;
        let mut preimages = Vec::with_capacity(rects.len());
        for (k, r) in rects.iter().enumerate() {
            match inv.maps_affinely(r) {
                Some(d) => preimages.push(d),
                None => {
                    failing = Some(k);
                    break;
                }
            }
        }
        match failing {
            None => {
                let target_pat = Pattern::new(rects).expect("search states are partitions");
                let target = pattern_to_tree(&target_pat)?;
                let (_, tgt_leaves) = tree_to_pattern(&target);
                let mut tgt_index = HashMap::new();
                for (i, r) in tgt_leaves.iter().enumerate() {
                    tgt_index.insert(format!("{r}"), i);
                }
                let src_pat = Pattern::new(preimages).expect("pullbacks partition the square");
                let source = pattern_to_tree(&src_pat)?;
                let (_, src_leaves) = tree_to_pattern(&source);
                let mut perm = Vec::with_capacity(src_leaves.len());
                for d in &src_leaves {
                    let r = g.maps_affinely(d).expect("forward image of a pulled-back rect");
                    perm.push(tgt_index[&format!("{r}")]);
                }
                return TreePair::new(source, target, perm);
            }
            Some(k) => {
                for axis in [Axis::Vertical, Axis::Horizontal] {
                    let (lo, hi) = rects[k].split(axis);
                    let f = fineness.max(lo.size());
                    if f > budget_depth {
                        continue;
                    }
                    let mut child = rects.clone();
                    child[k] = lo;
                    child.push(hi);
                    child.sort();
                    seq += 1;
                    heap.push(Reverse((f, count + 1, seq)));
                    store.insert(seq, child);
                }
            }
        }
    }
    Err(TreeAlgError::BudgetExceeded)
}

/// One symbol of a decomposition word.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LetterKind {
    A,
    B,
    C,
    Pi,
    PiBar,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Letter {
    pub kind: LetterKind,
    pub index: u32,
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LetterKind::A => write!(f, "A{}", self.index),
            LetterKind::B => write!(f, "B{}", self.index),
            LetterKind::C => write!(f, "C{}", self.index),
            LetterKind::Pi => write!(f, "pi_{}", self.index),
            LetterKind::PiBar => write!(f, "pib_{}", self.index),
        }
    }
}

/// Render a word as whitespace-separated symbols.
#[must_use]
pub fn word_to_string(w: &[Letter]) -> String {
    w.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ")
}

/// The element of a single decomposition letter, built from its tree pair.
#[must_use]
pub fn letter_element(l: &Letter) -> Element {
    let i = l.index as usize;
    match l.kind {
        LetterKind::A => TreePair::new(
            ColoredTree::spine_with_caret(i + 2, i, Color::A),
            ColoredTree::spine(i + 3),
            (0..i + 3).collect(),
        ),
        LetterKind::B => TreePair::new(
            ColoredTree::spine_with_caret(i + 2, i, Color::B),
            ColoredTree::spine(i + 3),
            (0..i + 3).collect(),
        ),
        LetterKind::C => TreePair::new(
            ColoredTree::spine_with_caret(i + 1, i, Color::B),
            ColoredTree::spine(i + 2),
            (0..i + 2).collect(),
        ),
        LetterKind::Pi => {
            let mut perm: Vec<usize> = (0..i + 3).collect();
            perm.swap(i, i + 1);
            TreePair::new(ColoredTree::spine(i + 3), ColoredTree::spine(i + 3), perm)
        }
        LetterKind::PiBar => {
            let mut perm: Vec<usize> = (0..i + 2).collect();
            perm.swap(i, i + 1);
            TreePair::new(ColoredTree::spine(i + 2), ColoredTree::spine(i + 2), perm)
        }
    }
    .expect("letter tree pairs are valid")
    .to_element()
}

/// Compose the letters left to right (apply the first letter first).
#[must_use]
pub fn word_element(w: &[Letter]) -> Element {
    let mut acc = Element::identity();
    for l in w {
        acc = acc.compose(&letter_element(l));
    }
    acc
}

/// A positive word straightening `t` onto the all-`a` spine: the word `w`
/// with element equal to the pair (t, identity numbering, spine).
///
/// First every `b`-colored node on the right spine is consumed by a `C`
/// letter at its depth (shallowest first), then off-spine carets are
/// consumed by `A`/`B` letters grouped at weakly increasing spine positions.
#[must_use]
pub fn straighten(t: &ColoredTree) -> Vec<Letter> {
    let mut word = Vec::new();
    // Right spine: collect left subtrees; emit C at each b-colored node.
    let mut subs: Vec<ColoredTree> = Vec::new();
    let mut cur = t;
    while let ColoredTree::Caret { color, left, right } = cur {
        if *color == Color::B {
            word.push(Letter { kind: LetterKind::C, index: subs.len() as u32 });
        }
        subs.push((**left).clone());
        cur = right;
    }
    // Consume off-spine carets: removing the caret at spine position i
    // promotes its left child in place and pushes its right child to a new
    // spine slot at i+1.
    let mut i = 0;
    while i < subs.len() {
        while let ColoredTree::Caret { color, left, right } = subs[i].clone() {
            let kind = if color == Color::A { LetterKind::A } else { LetterKind::B };
            word.push(Letter { kind, index: i as u32 });
            subs[i] = *left;
            subs.insert(i + 1, *right);
        }
        i += 1;
    }
    word
}

/// Decompose a tree pair as P Pi Q^-1: P straightens the source, Q the
/// target, and Pi realizes the leaf permutation on the spine as adjacent
/// transpositions.
#[must_use]
pub fn decompose_ppiq(tp: &TreePair) -> (Vec<Letter>, Vec<Letter>, Vec<Letter>) {
    let p = straighten(&tp.source);
    let q = straighten(&tp.target);
    let n = tp.perm.len();
    // Bubble-sort the inverse permutation by adjacent swaps; the reversed
    // swap sequence composes (first letter applied first) to the permutation.
    let mut b = vec![0usize; n];
    for (j, &v) in tp.perm.iter().enumerate() {
        b[v] = j;
    }
    let mut swaps = Vec::new();
    loop {
        let mut done = true;
        for j in 0..n.saturating_sub(1) {
            if b[j] > b[j + 1] {
                b.swap(j, j + 1);
                swaps.push(j);
                done = false;
            }
        }
        if done {
            break;
        }
    }
    swaps.reverse();
    let pi = swaps
        .into_iter()
        .map(|j| {
            if j + 2 == n {
                Letter { kind: LetterKind::PiBar, index: j as u32 }
            } else {
                Letter { kind: LetterKind::Pi, index: j as u32 }
            }
        })
        .collect();
    (p, pi, q)
}

/// The element of a full decomposition (P, Pi, Q): P then Pi then Q^-1.
#[must_use]
pub fn ppiq_element(p: &[Letter], pi: &[Letter], q: &[Letter]) -> Element {
    word_element(p)
        .compose(&word_element(pi))
        .compose(&word_element(q).inverse())
}

/// Indices of the maximal C-prefix of a positive decomposition word, after
/// validating the word shape.
pub fn extract_c_prefix(q: &[Letter]) -> Result<Vec<u32>, TreeAlgError> {
    let mut cs = Vec::new();
    let mut k = 0;
    while k < q.len() && q[k].kind == LetterKind::C {
        if let Some(&last) = cs.last() {
            if q[k].index <= last {
                return Err(TreeAlgError::MalformedWord(
                    "C indices must be strictly increasing".into(),
                ));
            }
        }
        cs.push(q[k].index);
        k += 1;
    }
    let mut last = None;
    for l in &q[k..] {
        match l.kind {
            LetterKind::A | LetterKind::B => {
                if let Some(prev) = last {
                    if l.index < prev {
                        return Err(TreeAlgError::MalformedWord(
                            "A/B block indices must be weakly increasing".into(),
                        ));
                    }
                }
                last = Some(l.index);
            }
            LetterKind::C => {
                return Err(TreeAlgError::MalformedWord("C after an A/B letter".into()))
            }
            _ => {
                return Err(TreeAlgError::MalformedWord(
                    "permutation letter in a positive word".into(),
                ))
            }
        }
    }
    Ok(cs)
}

/// Uniform random colored tree with the given caret count, for testing.
#[must_use]
pub fn random_tree<R: rand::Rng>(rng: &mut R, carets: usize) -> ColoredTree {
    if carets == 0 {
        return ColoredTree::Leaf;
    }
    let left_carets = rng.gen_range(0..carets);
    let color = if rng.gen_bool(0.5) { Color::A } else { Color::B };
    ColoredTree::caret(
        color,
        random_tree(rng, left_carets),
        random_tree(rng, carets - 1 - left_carets),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn t(s: &str) -> ColoredTree {
        ColoredTree::parse(s).unwrap()
    }

    fn r(s: &str) -> DyadicRect {
        DyadicRect::parse(s).unwrap()
    }

    #[test]
    fn tree_basics_and_serialization() {
        let tree = t("a(b(..).)");
        assert_eq!(tree.leaf_count(), 3);
        assert_eq!(tree.caret_count(), 2);
        assert_eq!(tree.depth(), 2);
        assert_eq!(tree.to_string(), "a(b(..).)");
        assert!(ColoredTree::parse("a(..").is_err());
        assert!(ColoredTree::parse("c(..)").is_err());
        assert_eq!(ColoredTree::spine(4).to_string(), "a(.a(.a(..)))");
        assert_eq!(
            ColoredTree::spine_with_caret(3, 1, Color::B).to_string(),
            "a(.a(b(..).))"
        );
        assert_eq!(ColoredTree::spine_with_caret(2, 1, Color::B).to_string(), "a(.b(..))");
    }

    #[test]
    fn tree_pattern_examples() {
        let (p, leaves) = tree_to_pattern(&ColoredTree::Leaf);
        assert_eq!(p, Pattern::unit());
        assert_eq!(leaves, vec![DyadicRect::unit()]);
        let (p, leaves) = tree_to_pattern(&t("a(..)"));
        assert_eq!(leaves, vec![r("0,-"), r("1,-")]);
        assert_eq!(p.len(), 2);
        // Both orders of mixed splits give the four quadrants.
        let (p1, l1) = tree_to_pattern(&t("a(b(..)b(..))"));
        let (p2, l2) = tree_to_pattern(&t("b(a(..)a(..))"));
        assert_eq!(p1, p2);
        assert_ne!(l1, l2);
    }

    #[test]
    fn pattern_tree_round_trip() {
        assert!(pattern_to_tree(&Pattern::unit()).unwrap().is_leaf());
        let p = Pattern::new(vec![r("0,0"), r("0,1"), r("1,-")]).unwrap();
        let tree = pattern_to_tree(&p).unwrap();
        assert_eq!(tree.to_string(), "a(b(..).)");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let carets = rng.gen_range(0..10);
            let tree = random_tree(&mut rng, carets);
            let (p, _) = tree_to_pattern(&tree);
            let back = pattern_to_tree(&p).unwrap();
            let (p2, _) = tree_to_pattern(&back);
            assert_eq!(p, p2);
            // Depth equals fineness: branch length is the leaf rect size.
            assert_eq!(tree.depth(), p.fineness());
            assert_eq!(back.depth(), tree.depth());
        }
    }

    #[test]
    fn letter_elements_match_hand_maps() {
        let a0 = letter_element(&Letter { kind: LetterKind::A, index: 0 });
        let hand = Element::new(vec![
            (r("00,-"), r("0,-")),
            (r("01,-"), r("10,-")),
            (r("1,-"), r("11,-")),
        ])
        .unwrap();
        assert!(a0.same_map(&hand));
        let c0 = letter_element(&Letter { kind: LetterKind::C, index: 0 });
        let hand = Element::new(vec![(r("-,0"), r("0,-")), (r("-,1"), r("1,-"))]).unwrap();
        assert!(c0.same_map(&hand));
        let pib0 = letter_element(&Letter { kind: LetterKind::PiBar, index: 0 });
        let hand = Element::new(vec![(r("0,-"), r("1,-")), (r("1,-"), r("0,-"))]).unwrap();
        assert!(pib0.same_map(&hand));
        let pi0 = letter_element(&Letter { kind: LetterKind::Pi, index: 0 });
        let hand = Element::new(vec![
            (r("0,-"), r("10,-")),
            (r("10,-"), r("0,-")),
            (r("11,-"), r("11,-")),
        ])
        .unwrap();
        assert!(pi0.same_map(&hand));
    }

    #[test]
    fn straighten_is_a_spine_word() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let carets = rng.gen_range(0..8);
            let tree = random_tree(&mut rng, carets);
            let n = tree.leaf_count();
            let w = straighten(&tree);
            // Shape: C-prefix strictly increasing, then weakly increasing A/B.
            extract_c_prefix(&w).unwrap();
            let target = TreePair::new(tree, ColoredTree::spine(n), (0..n).collect())
                .unwrap()
                .to_element();
            assert!(word_element(&w).same_map(&target));
        }
    }

    #[test]
    fn straighten_examples() {
        assert!(straighten(&ColoredTree::spine(5)).is_empty());
        let w = straighten(&t("b(.b(..))"));
        assert_eq!(word_to_string(&w), "C0 C1");
        let w = straighten(&t("a(a(a(..).).)"));
        assert_eq!(word_to_string(&w), "A0 A0");
    }

    #[test]
    fn decompose_identity_and_swap() {
        let (p, pi, q) = decompose_ppiq(&TreePair::identity());
        assert!(p.is_empty() && pi.is_empty() && q.is_empty());
        let swap = TreePair::new(t("a(..)"), t("a(..)"), vec![1, 0]).unwrap();
        let (p, pi, q) = decompose_ppiq(&swap);
        assert!(p.is_empty() && q.is_empty());
        assert_eq!(word_to_string(&pi), "pib_0");
        assert!(ppiq_element(&p, &pi, &q).same_map(&swap.to_element()));
    }

    #[test]
    fn decompose_random_pairs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..120 {
            let carets = rng.gen_range(0..7);
            let source = random_tree(&mut rng, carets);
            let target = random_tree(&mut rng, carets);
            let n = source.leaf_count();
            let mut perm: Vec<usize> = (0..n).collect();
            for j in (1..n).rev() {
                let k = rng.gen_range(0..=j);
                perm.swap(j, k);
            }
            let tp = TreePair::new(source, target, perm).unwrap();
            let (p, pi, q) = decompose_ppiq(&tp);
            assert!(ppiq_element(&p, &pi, &q).same_map(&tp.to_element()));
        }
    }

    #[test]
    fn minimal_pair_basics() {
        let id_pair = minimal_pair(&Element::identity(), 4).unwrap();
        assert!(id_pair.source.is_leaf() && id_pair.target.is_leaf());
        let c0 = letter_element(&Letter { kind: LetterKind::C, index: 0 });
        let mp = minimal_pair(&c0, 4).unwrap();
        assert_eq!(mp.target.depth(), 1);
        assert_eq!(mp.source.depth(), 1);
        assert!(mp.to_element().same_map(&c0));
        let a0 = letter_element(&Letter { kind: LetterKind::A, index: 0 });
        let mp = minimal_pair(&a0, 8).unwrap();
        assert_eq!(mp.target.depth(), 2);
        assert!(mp.to_element().same_map(&a0));
        assert!(matches!(minimal_pair(&a0, 1), Err(TreeAlgError::BudgetExceeded)));
    }

    #[test]
    fn minimal_pair_on_random_elements() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        for _ in 0..25 {
            let g = Element::random_with(&mut rng, 4);
            let grid = crate::gridform::normal_form(&g);
            let budget = grid.range_fineness().max(1);
            let mp = minimal_pair(&g, budget).unwrap();
            assert!(mp.to_element().same_map(&g));
            // The grid range is itself representable, so minimality bounds
            // the search by the grid fineness.
            assert!(mp.target.depth() <= budget);
            let (p, pi, q) = decompose_ppiq(&mp);
            assert!(ppiq_element(&p, &pi, &q).same_map(&g));
        }
    }

    #[test]
    fn c_prefix_extraction() {
        assert_eq!(extract_c_prefix(&[]).unwrap(), Vec::<u32>::new());
        let w = [
            Letter { kind: LetterKind::C, index: 0 },
            Letter { kind: LetterKind::C, index: 2 },
            Letter { kind: LetterKind::A, index: 1 },
        ];
        assert_eq!(extract_c_prefix(&w).unwrap(), vec![0, 2]);
        assert_eq!(extract_c_prefix(&w[2..]).unwrap(), Vec::<u32>::new());
        let bad = [
            Letter { kind: LetterKind::C, index: 2 },
            Letter { kind: LetterKind::C, index: 0 },
        ];
        assert!(extract_c_prefix(&bad).is_err());
        let bad = [
            Letter { kind: LetterKind::A, index: 0 },
            Letter { kind: LetterKind::C, index: 1 },
        ];
        assert!(extract_c_prefix(&bad).is_err());
        let bad = [Letter { kind: LetterKind::Pi, index: 0 }];
        assert!(extract_c_prefix(&bad).is_err());
    }
}
