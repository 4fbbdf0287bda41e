//! Combinatorics of the dyadic square: binary words, dyadic rectangles and
//! numbered patterns.
//!
//! A point of the square is a pair of infinite binary sequences. A dyadic
//! rectangle is addressed by a pair of finite binary words `(w1, w2)`; it
//! stands for the set of pairs of sequences extending `w1` and `w2`. A
//! pattern is a finite set of dyadic rectangles partitioning the square.

use smallvec::SmallVec;
use std::cmp::Ordering;
use std::fmt;

/// A finite binary word, bit packed. Bit `i` of the word lives in block
/// `i / 64` at position `63 - (i % 64)`, so whole-block comparison agrees
/// with lexicographic comparison of the bits. Unused trailing bits of the
/// last block are kept zero; `Eq`/`Hash` rely on that.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BinaryWord {
    len: u32,
    blocks: SmallVec<[u64; 1]>,
}

impl BinaryWord {
    #[must_use]
    pub fn empty() -> Self {
        BinaryWord { len: 0, blocks: SmallVec::new() }
    }

    /// Word consisting of `n` zero bits.
    #[must_use]
    pub fn zeros(n: u32) -> Self {
        let nb = ((n as usize) + 63) / 64;
        BinaryWord { len: n, blocks: smallvec::smallvec![0u64; nb] }
    }

    /// Parse from a string of `0`/`1` characters; `-` and `""` denote the
    /// empty word.
    pub fn parse(s: &str) -> Result<Self, String> {
        if s == "-" || s.is_empty() {
            return Ok(Self::empty());
        }
        let mut w = Self::empty();
        for c in s.chars() {
            match c {
                '0' => w.push(0),
                '1' => w.push(1),
                _ => return Err(format!("invalid character {c:?} in binary word {s:?}")),
            }
        }
        Ok(w)
    }

    #[must_use]
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut w = Self::empty();
        for &b in bits {
            w.push(b);
        }
        w
    }

    #[inline]
    #[must_use]
    pub fn len(&self) -> u32 {
        self.len
    }

    #[inline]
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    #[must_use]
    pub fn get(&self, i: u32) -> u8 {
        debug_assert!(i < self.len);
        ((self.blocks[(i >> 6) as usize] >> (63 - (i & 63))) & 1) as u8
    }

    pub fn push(&mut self, bit: u8) {
        debug_assert!(bit <= 1);
        let i = self.len;
        if i & 63 == 0 {
            self.blocks.push(0);
        }
        if bit == 1 {
            let idx = (i >> 6) as usize;
            self.blocks[idx] |= 1u64 << (63 - (i & 63));
        }
        self.len += 1;
    }

    pub fn pop(&mut self) -> Option<u8> {
        if self.len == 0 {
            return None;
        }
        self.len -= 1;
        let i = self.len;
        let idx = (i >> 6) as usize;
        let mask = 1u64 << (63 - (i & 63));
        let bit = ((self.blocks[idx] & mask) != 0) as u8;
        self.blocks[idx] &= !mask;
        if i & 63 == 0 {
            self.blocks.pop();
        }
        Some(bit)
    }

    #[inline]
    #[must_use]
    pub fn last(&self) -> Option<u8> {
        if self.len == 0 {
            None
        } else {
            Some(self.get(self.len - 1))
        }
    }

    /// The word with the final bit flipped. Panics on the empty word.
    #[must_use]
    pub fn with_last_flipped(&self) -> Self {
        assert!(self.len > 0, "cannot flip last bit of the empty word");
        let mut w = self.clone();
        let i = w.len - 1;
        w.blocks[(i >> 6) as usize] ^= 1u64 << (63 - (i & 63));
        w
    }

    /// The word without its final bit. Panics on the empty word.
    #[must_use]
    pub fn parent(&self) -> Self {
        assert!(self.len > 0);
        let mut w = self.clone();
        w.pop();
        w
    }

    /// The word extended by one bit.
    #[must_use]
    pub fn child(&self, bit: u8) -> Self {
        let mut w = self.clone();
        w.push(bit);
        w
    }

    #[must_use]
    pub fn is_prefix_of(&self, other: &Self) -> bool {
        if self.len > other.len {
            return false;
        }
        let full = (self.len >> 6) as usize;
        if self.blocks[..full] != other.blocks[..full] {
            return false;
        }
        let rem = self.len & 63;
        if rem == 0 {
            return true;
        }
        let mask = !0u64 << (64 - rem);
        (self.blocks[full] ^ other.blocks[full]) & mask == 0
    }

    #[must_use]
    pub fn comparable(&self, other: &Self) -> bool {
        if self.len <= other.len {
            self.is_prefix_of(other)
        } else {
            other.is_prefix_of(self)
        }
    }

    /// The suffix of `self` after removing the prefix `p`, if `p` is a prefix.
    #[must_use]
    pub fn strip_prefix(&self, p: &Self) -> Option<Self> {
        if !p.is_prefix_of(self) {
            return None;
        }
        Some(self.slice(p.len, self.len))
    }

    /// Bits `[from, to)` as a new word.
    #[must_use]
    pub fn slice(&self, from: u32, to: u32) -> Self {
        debug_assert!(from <= to && to <= self.len);
        let n = to - from;
        let mut out = Self::zeros(n);
        if n == 0 {
            return out;
        }
        let shift = from & 63;
        let start = (from >> 6) as usize;
        let nb = out.blocks.len();
        if shift == 0 {
            out.blocks.copy_from_slice(&self.blocks[start..start + nb]);
        } else {
            for k in 0..nb {
                let hi = self.blocks[start + k] << shift;
                let lo = self
                    .blocks
                    .get(start + k + 1)
                    .map_or(0, |b| b >> (64 - shift));
                out.blocks[k] = hi | lo;
            }
        }
        out.mask_tail();
        out
    }

    /// `self` followed by `other`.
    #[must_use]
    pub fn concat(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.extend_with(other);
        out
    }

    /// Append `other` in place.
    pub fn extend_with(&mut self, other: &Self) {
        if other.len == 0 {
            return;
        }
        let shift = self.len & 63;
        let total = self.len + other.len;
        if shift == 0 {
            self.blocks.extend_from_slice(&other.blocks);
        } else {
            let last = self.blocks.len() - 1;
            self.blocks[last] |= other.blocks[0] >> shift;
            for k in 0..other.blocks.len() {
                let hi = other.blocks[k] << (64 - shift);
                let lo = other.blocks.get(k + 1).map_or(0, |b| b >> shift);
                let blk = hi | lo;
                if self.blocks.len() < ((total as usize) + 63) / 64 {
                    self.blocks.push(blk);
                }
            }
        }
        self.len = total;
        self.mask_tail();
        self.blocks.truncate(((total as usize) + 63) / 64);
    }

    #[must_use]
    pub fn is_all_zeros(&self) -> bool {
        self.blocks.iter().all(|&b| b == 0)
    }

    fn mask_tail(&mut self) {
        let rem = self.len & 63;
        if rem != 0 {
            let last = self.blocks.len() - 1;
            self.blocks[last] &= !0u64 << (64 - rem);
        }
    }
}

impl Ord for BinaryWord {
    /// Lexicographic on bits, with a proper prefix ordered before its
    /// extensions.
    fn cmp(&self, other: &Self) -> Ordering {
        let n = self.len.min(other.len);
        let full = (n >> 6) as usize;
        for k in 0..full {
            match self.blocks[k].cmp(&other.blocks[k]) {
                Ordering::Equal => {}
                ord => return ord,
            }
        }
        let rem = n & 63;
        if rem != 0 {
            let mask = !0u64 << (64 - rem);
            let a = self.blocks[full] & mask;
            let b = other.blocks[full] & mask;
            match a.cmp(&b) {
                Ordering::Equal => {}
                ord => return ord,
            }
        }
        self.len.cmp(&other.len)
    }
}

impl PartialOrd for BinaryWord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BinaryWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len == 0 {
            return write!(f, "-");
        }
        for i in 0..self.len {
            write!(f, "{}", self.get(i))?;
        }
        Ok(())
    }
}

impl fmt::Debug for BinaryWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Axis of a subdivision. `Vertical` splits the first coordinate (a cut by a
/// vertical line), `Horizontal` the second.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash, serde::Serialize)]
pub enum Axis {
    Vertical,
    Horizontal,
}

impl Axis {
    #[must_use]
    pub fn other(self) -> Axis {
        match self {
            Axis::Vertical => Axis::Horizontal,
            Axis::Horizontal => Axis::Vertical,
        }
    }
}

/// A dyadic rectangle `{w1 s : s} x {w2 t : t}`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct DyadicRect {
    pub w1: BinaryWord,
    pub w2: BinaryWord,
}

impl DyadicRect {
    #[must_use]
    pub fn new(w1: BinaryWord, w2: BinaryWord) -> Self {
        DyadicRect { w1, w2 }
    }

    /// The whole square.
    #[must_use]
    pub fn unit() -> Self {
        DyadicRect::default()
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| format!("rectangle {s:?} is not of the form w1,w2"))?;
        Ok(DyadicRect::new(BinaryWord::parse(a.trim())?, BinaryWord::parse(b.trim())?))
    }

    /// The size of the rectangle: the total number of letters in its address.
    /// A rectangle of size `k` has area `2^-k`.
    #[inline]
    #[must_use]
    pub fn size(&self) -> u32 {
        self.w1.len() + self.w2.len()
    }

    #[must_use]
    pub fn word(&self, axis: Axis) -> &BinaryWord {
        match axis {
            Axis::Vertical => &self.w1,
            Axis::Horizontal => &self.w2,
        }
    }

    /// Both halves after splitting along `axis`.
    #[must_use]
    pub fn split(&self, axis: Axis) -> (DyadicRect, DyadicRect) {
        match axis {
            Axis::Vertical => (
                DyadicRect::new(self.w1.child(0), self.w2.clone()),
                DyadicRect::new(self.w1.child(1), self.w2.clone()),
            ),
            Axis::Horizontal => (
                DyadicRect::new(self.w1.clone(), self.w2.child(0)),
                DyadicRect::new(self.w1.clone(), self.w2.child(1)),
            ),
        }
    }

    #[must_use]
    pub fn contains(&self, other: &DyadicRect) -> bool {
        self.w1.is_prefix_of(&other.w1) && self.w2.is_prefix_of(&other.w2)
    }

    #[must_use]
    pub fn overlaps(&self, other: &DyadicRect) -> bool {
        self.w1.comparable(&other.w1) && self.w2.comparable(&other.w2)
    }

    /// Intersection of two overlapping rectangles: the longer word in each
    /// coordinate.
    #[must_use]
    pub fn intersect(&self, other: &DyadicRect) -> Option<DyadicRect> {
        if !self.overlaps(other) {
            return None;
        }
        let w1 = if self.w1.len() >= other.w1.len() { self.w1.clone() } else { other.w1.clone() };
        let w2 = if self.w2.len() >= other.w2.len() { self.w2.clone() } else { other.w2.clone() };
        Some(DyadicRect::new(w1, w2))
    }

    /// Appends suffixes to both coordinates: the image of `self` treated as a
    /// sub-rectangle address inside a containing rectangle.
    #[must_use]
    pub fn append(&self, s1: &BinaryWord, s2: &BinaryWord) -> DyadicRect {
        DyadicRect::new(self.w1.concat(s1), self.w2.concat(s2))
    }

    /// The suffix pair of `self` relative to a containing rectangle.
    #[must_use]
    pub fn suffix_in(&self, outer: &DyadicRect) -> Option<(BinaryWord, BinaryWord)> {
        Some((self.w1.strip_prefix(&outer.w1)?, self.w2.strip_prefix(&outer.w2)?))
    }
}

impl fmt::Display for DyadicRect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.w1, self.w2)
    }
}

impl fmt::Debug for DyadicRect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Errors from pattern construction and queries.
#[derive(Debug, thiserror::Error)]
pub enum CantorError {
    #[error("rectangle {0} is not a rectangle of the pattern")]
    RectNotInPattern(DyadicRect),
    #[error("rectangles {0} and {1} overlap")]
    Overlap(DyadicRect, DyadicRect),
    #[error("rectangle sizes sum to measure 1 {0} the unit square")]
    BadMeasure(&'static str),
    #[error("pattern is empty")]
    Empty,
    #[error("parse error: {0}")]
    Parse(String),
}

/// A pattern: a finite list of dyadic rectangles partitioning the square,
/// kept sorted by `(w1, w2)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Pattern {
    rects: Vec<DyadicRect>,
}

impl Pattern {
    /// The trivial pattern consisting of the whole square.
    #[must_use]
    pub fn unit() -> Self {
        Pattern { rects: vec![DyadicRect::unit()] }
    }

    /// Build a pattern after checking that `rects` is a partition.
    pub fn new(mut rects: Vec<DyadicRect>) -> Result<Self, CantorError> {
        validate_partition(&rects)?;
        rects.sort();
        Ok(Pattern { rects })
    }

    /// Build without the partition check; `rects` must already be a
    /// partition. Sorting is still applied.
    #[must_use]
    pub fn from_rects_unchecked(mut rects: Vec<DyadicRect>) -> Self {
        rects.sort();
        debug_assert!(validate_partition(&rects).is_ok());
        Pattern { rects }
    }

    #[must_use]
    pub fn rects(&self) -> &[DyadicRect] {
        &self.rects
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.rects.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.rects.is_empty()
    }

    /// Maximum rectangle size in the pattern.
    #[must_use]
    pub fn fineness(&self) -> u32 {
        self.rects.iter().map(DyadicRect::size).max().unwrap_or(0)
    }

    /// The rectangle containing the origin corner: both its words are all
    /// zeros, and it is the first rectangle in canonical order.
    #[must_use]
    pub fn rect_at_origin(&self) -> &DyadicRect {
        let r = &self.rects[0];
        debug_assert!(r.w1.is_all_zeros() && r.w2.is_all_zeros());
        r
    }

    /// Replace `rect` by its two halves along `axis`.
    pub fn subdivide(&self, rect: &DyadicRect, axis: Axis) -> Result<Pattern, CantorError> {
        let idx = self
            .rects
            .binary_search(rect)
            .map_err(|_| CantorError::RectNotInPattern(rect.clone()))?;
        let mut rects = self.rects.clone();
        let (a, b) = rects[idx].split(axis);
        rects[idx] = a;
        rects.insert(idx + 1, b);
        rects.sort();
        Ok(Pattern { rects })
    }

    /// The rectangle of the pattern containing the point addressed by the
    /// prefix pair, if the prefixes are long enough to determine it.
    #[must_use]
    pub fn rect_containing(&self, u1: &BinaryWord, u2: &BinaryWord) -> Option<&DyadicRect> {
        self.rects
            .iter()
            .find(|r| r.w1.is_prefix_of(u1) && r.w2.is_prefix_of(u2))
    }

    /// Coarsest common refinement of two patterns.
    #[must_use]
    pub fn common_refinement(&self, other: &Pattern) -> Pattern {
        let pieces = refine_merge(&self.rects, &other.rects);
        Pattern::from_rects_unchecked(pieces.into_iter().map(|(r, _, _)| r).collect())
    }

    /// Serialize as one `w1,w2` line per rectangle in canonical order.
    #[must_use]
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.rects {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Pattern, CantorError> {
        let mut rects = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            rects.push(DyadicRect::parse(line).map_err(CantorError::Parse)?);
        }
        Pattern::new(rects)
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pattern{:?}", self.rects)
    }
}

/// Check that the rectangles tile the unit square: sizes sum to measure one
/// and no two overlap.
pub fn validate_partition(rects: &[DyadicRect]) -> Result<(), CantorError> {
    if rects.is_empty() {
        return Err(CantorError::Empty);
    }
    // Pairwise overlap first: it gives the more specific diagnosis. The
    // quadratic scan is capped; larger patterns arise only from internal
    // constructions that preserve the partition property.
    if rects.len() <= 4096 {
        for (i, a) in rects.iter().enumerate() {
            for b in &rects[i + 1..] {
                if a.overlaps(b) {
                    return Err(CantorError::Overlap(a.clone(), b.clone()));
                }
            }
        }
    }
    // Measures are summed as counts per size, carrying doubles upward, so
    // arbitrarily deep rectangles are exact.
    let max_size = rects.iter().map(DyadicRect::size).max().unwrap() as usize;
    let mut counts = vec![0u64; max_size + 1];
    for r in rects {
        counts[r.size() as usize] += 1;
    }
    for s in (1..=max_size).rev() {
        if counts[s] % 2 != 0 {
            return Err(CantorError::BadMeasure("below"));
        }
        counts[s - 1] += counts[s] / 2;
    }
    if counts[0] != 1 {
        return Err(CantorError::BadMeasure(if counts[0] == 0 { "below" } else { "above" }));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Refinement merge
// ---------------------------------------------------------------------------

/// Classification of a rectangle relative to a node of the splitting tree at
/// word depths `(d1, d2)`.
#[derive(Clone, Copy, PartialEq)]
enum Class {
    Containing,
    SpanV, // full node width, proper height: |w1| <= d1 < .. and |w2| > d2
    SpanH, // proper width, full node height
    Proper,
}

fn classify(r: &DyadicRect, d1: u32, d2: u32) -> Class {
    match (r.w1.len() <= d1, r.w2.len() <= d2) {
        (true, true) => Class::Containing,
        (true, false) => Class::SpanV,
        (false, true) => Class::SpanH,
        (false, false) => Class::Proper,
    }
}

#[derive(Clone, Default)]
struct SideFrame {
    /// Range into the side's shared sorted index array: rectangles proper at
    /// this node.
    lo: u32,
    hi: u32,
    /// Rectangles spanning the node along one axis, carried explicitly.
    spans: SmallVec<[u32; 4]>,
    /// Index of a rectangle containing the node, when the side is atomic.
    containing: Option<u32>,
}

struct Frame {
    d1: u32,
    d2: u32,
    p: SideFrame,
    q: SideFrame,
}

enum Op {
    Visit(Frame),
    PushBit(Axis, u8),
    PopBit(Axis),
}

/// Coarsest common refinement of two partitions, with provenance: each output
/// piece carries the index of the rectangle of `p` and of `q` containing it.
/// Output pieces are produced in depth-first order and are pairwise disjoint.
pub fn refine_merge(p: &[DyadicRect], q: &[DyadicRect]) -> Vec<(DyadicRect, u32, u32)> {
    let mut out = Vec::new();
    let mut idx_p: Vec<u32> = (0..p.len() as u32).collect();
    let mut idx_q: Vec<u32> = (0..q.len() as u32).collect();
    idx_p.sort_by(|&a, &b| p[a as usize].cmp(&p[b as usize]));
    idx_q.sort_by(|&a, &b| q[a as usize].cmp(&q[b as usize]));

    let mut path1 = BinaryWord::empty();
    let mut path2 = BinaryWord::empty();

    let root = Frame {
        d1: 0,
        d2: 0,
        p: seed_frame(&idx_p),
        q: seed_frame(&idx_q),
    };
    let mut stack = vec![Op::Visit(root)];
    let mut scratch: Vec<u32> = Vec::new();

    while let Some(op) = stack.pop() {
        match op {
            Op::PushBit(Axis::Vertical, b) => path1.push(b),
            Op::PushBit(Axis::Horizontal, b) => path2.push(b),
            Op::PopBit(Axis::Vertical) => {
                path1.pop();
            }
            Op::PopBit(Axis::Horizontal) => {
                path2.pop();
            }
            Op::Visit(fr) => {
                visit(fr, p, q, &mut idx_p, &mut idx_q, &path1, &path2, &mut stack, &mut out, &mut scratch);
            }
        }
    }
    out
}

fn seed_frame(idx: &[u32]) -> SideFrame {
    SideFrame { lo: 0, hi: idx.len() as u32, spans: SmallVec::new(), containing: None }
}

#[allow(clippy::too_many_arguments)]
fn visit(
    fr: Frame,
    pr: &[DyadicRect],
    qr: &[DyadicRect],
    idx_p: &mut [u32],
    idx_q: &mut [u32],
    path1: &BinaryWord,
    path2: &BinaryWord,
    stack: &mut Vec<Op>,
    out: &mut Vec<(DyadicRect, u32, u32)>,
    scratch: &mut Vec<u32>,
) {
    let Frame { d1, d2, p: mut p_side, q: mut q_side } = fr;
    // Items whose first-coordinate word has been fully consumed sort at the
    // front of the range (empty suffix first); move them out of the range so
    // vertical splits can partition by the next bit.
    absorb_spent(&mut p_side, pr, d1, idx_p);
    absorb_spent(&mut q_side, qr, d1, idx_q);
    // Promote a lone item that now contains the node.
    promote(&mut p_side, pr, d1, d2);
    promote(&mut q_side, qr, d1, d2);

    if let Some(pi) = p_side.containing {
        emit_side(&q_side, qr, idx_q, path1, path2, |piece, qi| out.push((piece, pi, qi)));
        return;
    }
    if let Some(qi) = q_side.containing {
        emit_side(&p_side, pr, idx_p, path1, path2, |piece, pi| out.push((piece, pi, qi)));
        return;
    }

    // Neither side is atomic: split the node. Prefer the axis duplicating the
    // fewest spanning items; a vertical split is free when nothing spans it.
    let (pv, ph) = span_counts(&p_side, pr, d1, d2);
    let (qv, qh) = span_counts(&q_side, qr, d1, d2);
    let axis = if pv + qv <= ph + qh { Axis::Vertical } else { Axis::Horizontal };

    let (p0, p1) = split_side(&p_side, pr, d1, d2, axis, idx_p, scratch);
    let (q0, q1) = split_side(&q_side, qr, d1, d2, axis, idx_q, scratch);
    let (e1, e2) = match axis {
        Axis::Vertical => (d1 + 1, d2),
        Axis::Horizontal => (d1, d2 + 1),
    };
    // LIFO order: child 0 fully, then child 1.
    stack.push(Op::PopBit(axis));
    stack.push(Op::Visit(Frame { d1: e1, d2: e2, p: p1, q: q1 }));
    stack.push(Op::PushBit(axis, 1));
    stack.push(Op::PopBit(axis));
    stack.push(Op::Visit(Frame { d1: e1, d2: e2, p: p0, q: q0 }));
    stack.push(Op::PushBit(axis, 0));
}

/// Move range items with `|w1| == d1` (empty first-coordinate suffix) into
/// the explicit span list. They form a prefix of the sorted range.
fn absorb_spent(side: &mut SideFrame, rects: &[DyadicRect], d1: u32, idx: &[u32]) {
    let range = &idx[side.lo as usize..side.hi as usize];
    let k = range.partition_point(|&i| rects[i as usize].w1.len() == d1);
    for &i in &range[..k] {
        side.spans.push(i);
    }
    side.lo += k as u32;
}

/// If the side consists of a single item that contains the node, mark it
/// atomic.
fn promote(side: &mut SideFrame, rects: &[DyadicRect], d1: u32, d2: u32) {
    if side.containing.is_some() || side.hi > side.lo {
        return;
    }
    if side.spans.len() == 1 {
        let i = side.spans[0];
        if classify(&rects[i as usize], d1, d2) == Class::Containing {
            side.containing = Some(i);
            side.spans.clear();
        }
    }
}

fn span_counts(side: &SideFrame, rects: &[DyadicRect], d1: u32, d2: u32) -> (usize, usize) {
    // Spanning items hiding in the sorted range (|w2| == d2) are not counted;
    // they only matter for patterns with genuinely crossed structure, where
    // the refinement is large regardless of the split order.
    let mut v = 0;
    let mut h = 0;
    for &i in &side.spans {
        match classify(&rects[i as usize], d1, d2) {
            Class::SpanV => v += 1,
            Class::SpanH => h += 1,
            _ => {}
        }
    }
    (v, h)
}

/// Emit the pieces of all items of a side, clipped to the current node.
fn emit_side<F: FnMut(DyadicRect, u32)>(
    side: &SideFrame,
    rects: &[DyadicRect],
    idx: &[u32],
    path1: &BinaryWord,
    path2: &BinaryWord,
    mut emit: F,
) {
    if let Some(i) = side.containing {
        emit(DyadicRect::new(path1.clone(), path2.clone()), i);
        return;
    }
    for k in side.lo..side.hi {
        let i = idx[k as usize];
        emit(rects[i as usize].clone(), i);
    }
    for &i in &side.spans {
        let r = &rects[i as usize];
        let w1 = if r.w1.len() >= path1.len() { r.w1.clone() } else { path1.clone() };
        let w2 = if r.w2.len() >= path2.len() { r.w2.clone() } else { path2.clone() };
        emit(DyadicRect::new(w1, w2), i);
    }
}

/// Distribute a side's items to the two children of a split along `axis`.
/// Proper items within the sorted range are partitioned by their next bit;
/// items spanning the split axis are inherited by both children.
fn split_side(
    side: &SideFrame,
    rects: &[DyadicRect],
    d1: u32,
    d2: u32,
    axis: Axis,
    idx: &mut [u32],
    scratch: &mut Vec<u32>,
) -> (SideFrame, SideFrame) {
    debug_assert!(side.containing.is_none());
    let mut c0 = SideFrame { lo: side.lo, hi: side.lo, spans: SmallVec::new(), containing: None };
    let mut c1 = SideFrame { lo: side.hi, hi: side.hi, spans: SmallVec::new(), containing: None };

    let depth = match axis {
        Axis::Vertical => d1,
        Axis::Horizontal => d2,
    };
    let range = &mut idx[side.lo as usize..side.hi as usize];
    if !range.is_empty() {
        let has_bit = |i: u32| {
            let w = rects[i as usize].word(axis);
            w.len() > depth
        };
        let bit_of = |i: u32| rects[i as usize].word(axis).get(depth);
        if axis == Axis::Vertical {
            // Range is sorted by (w1 suffix, w2 suffix); every proper item has
            // |w1| > d1, so the next w1 bit is the leading key: binary search.
            debug_assert!(range.iter().all(|&i| has_bit(i)));
            let split = range.partition_point(|&i| bit_of(i) == 0) as u32;
            c0.lo = side.lo;
            c0.hi = side.lo + split;
            c1.lo = c0.hi;
            c1.hi = side.hi;
        } else {
            // Items with |w2| == d2 span the cut; the rest partition by the
            // next w2 bit. Stable partition keeps suffix order intact.
            scratch.clear();
            let mut zeros = 0usize;
            for &i in range.iter() {
                if has_bit(i) && bit_of(i) == 0 {
                    zeros += 1;
                }
            }
            scratch.resize(range.len(), 0);
            let mut z = 0usize;
            let mut o = zeros;
            for &i in range.iter() {
                if !has_bit(i) {
                    // |w2| == d2: spans the horizontal cut.
                    c0.spans.push(i);
                    c1.spans.push(i);
                    continue;
                }
                if bit_of(i) == 0 {
                    scratch[z] = i;
                    z += 1;
                } else {
                    scratch[o] = i;
                    o += 1;
                }
            }
            let kept = o;
            range[..z].copy_from_slice(&scratch[..z]);
            range[z..kept].copy_from_slice(&scratch[zeros..o]);
            c0.lo = side.lo;
            c0.hi = side.lo + z as u32;
            c1.lo = c0.hi;
            c1.hi = side.lo + kept as u32;
        }
    }
    for &i in &side.spans {
        let w = rects[i as usize].word(axis);
        if w.len() > depth {
            if w.get(depth) == 0 {
                c0.spans.push(i);
            } else {
                c1.spans.push(i);
            }
        } else {
            c0.spans.push(i);
            c1.spans.push(i);
        }
    }
    (c0, c1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> BinaryWord {
        BinaryWord::parse(s).unwrap()
    }

    fn r(s: &str) -> DyadicRect {
        DyadicRect::parse(s).unwrap()
    }

    #[test]
    fn word_basics() {
        let a = w("0110");
        assert_eq!(a.len(), 4);
        assert_eq!(a.to_string(), "0110");
        assert_eq!(w("-").len(), 0);
        assert_eq!(w("").to_string(), "-");
        assert_eq!(a.get(0), 0);
        assert_eq!(a.get(1), 1);
        assert_eq!(a.last(), Some(0));
        assert_eq!(a.with_last_flipped().to_string(), "0111");
        assert_eq!(a.parent().to_string(), "011");
        assert_eq!(a.child(1).to_string(), "01101");
    }

    #[test]
    fn word_order_prefix_first() {
        let mut v = vec![w("1"), w("00"), w("0"), w("01"), w("001"), w("")];
        v.sort();
        let got: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        assert_eq!(got, vec!["-", "0", "00", "001", "01", "1"]);
    }

    #[test]
    fn word_prefix_and_slice() {
        let a = w("0110");
        assert!(w("01").is_prefix_of(&a));
        assert!(!w("00").is_prefix_of(&a));
        assert_eq!(a.strip_prefix(&w("01")).unwrap().to_string(), "10");
        assert_eq!(a.strip_prefix(&w("0110")).unwrap().len(), 0);
        assert!(a.strip_prefix(&w("1")).is_none());
        assert_eq!(a.concat(&w("01")).to_string(), "011001");
    }

    #[test]
    fn word_long_ops() {
        // Cross block boundaries.
        let mut a = BinaryWord::empty();
        for i in 0..200 {
            a.push((i % 3 == 0) as u8);
        }
        let b = a.slice(63, 130);
        for i in 63..130 {
            assert_eq!(b.get(i - 63), a.get(i));
        }
        let c = a.slice(0, 63).concat(&a.slice(63, 200));
        assert_eq!(c, a);
        let mut d = a.clone();
        for _ in 0..137 {
            d.pop();
        }
        assert_eq!(d, a.slice(0, 63));
        assert!(a.slice(0, 100).is_prefix_of(&a));
    }

    #[test]
    fn rect_size_and_split() {
        let x = r("01,1");
        assert_eq!(x.size(), 3);
        let (a, b) = x.split(Axis::Vertical);
        assert_eq!(a.to_string(), "010,1");
        assert_eq!(b.to_string(), "011,1");
        let (a, b) = x.split(Axis::Horizontal);
        assert_eq!(a.to_string(), "01,10");
        assert_eq!(b.to_string(), "01,11");
    }

    #[test]
    fn rect_overlap_and_intersect() {
        assert!(r("0,-").overlaps(&r("01,1")));
        assert!(!r("0,0").overlaps(&r("0,1")));
        assert!(!r("00,-").overlaps(&r("01,-")));
        assert_eq!(r("0,-").intersect(&r("-,1")).unwrap().to_string(), "0,1");
        assert_eq!(r("0,1").intersect(&r("01,-")).unwrap().to_string(), "01,1");
    }

    #[test]
    fn partition_validation() {
        assert!(validate_partition(&[DyadicRect::unit()]).is_ok());
        assert!(validate_partition(&[r("0,-"), r("1,0"), r("1,1")]).is_ok());
        assert!(matches!(
            validate_partition(&[r("0,-"), r("1,0")]),
            Err(CantorError::BadMeasure(_))
        ));
        assert!(matches!(
            validate_partition(&[r("0,-"), r("1,0"), r("1,1"), r("11,1")]),
            Err(CantorError::Overlap(..)) | Err(CantorError::BadMeasure(_))
        ));
        assert!(matches!(
            validate_partition(&[r("0,-"), r("0,-"), r("1,0"), r("1,1")]),
            Err(CantorError::Overlap(..))
        ));
    }

    #[test]
    fn pattern_subdivide_and_origin() {
        let p = Pattern::unit();
        let p = p.subdivide(&DyadicRect::unit(), Axis::Vertical).unwrap();
        let p = p.subdivide(&r("0,-"), Axis::Horizontal).unwrap();
        assert_eq!(p.to_text(), "0,0\n0,1\n1,-\n");
        assert_eq!(p.fineness(), 2);
        assert_eq!(p.rect_at_origin().to_string(), "0,0");
        assert!(p.subdivide(&r("0,-"), Axis::Vertical).is_err());
    }

    #[test]
    fn refinement_matches_pairwise_intersection() {
        let p = Pattern::new(vec![r("0,0"), r("0,1"), r("10,-"), r("11,-")]).unwrap();
        let q = Pattern::new(vec![r("-,00"), r("-,01"), r("-,1")]).unwrap();
        let fast = p.common_refinement(&q);
        let mut slow: Vec<DyadicRect> = Vec::new();
        for a in p.rects() {
            for b in q.rects() {
                if let Some(c) = a.intersect(b) {
                    slow.push(c);
                }
            }
        }
        slow.sort();
        assert_eq!(fast.rects(), &slow[..]);
        assert_eq!(fast.len(), 9);
    }

    #[test]
    fn refinement_provenance() {
        let p = vec![r("0,-"), r("1,-")];
        let q = vec![r("-,0"), r("-,1")];
        let mut pieces = refine_merge(&p, &q);
        pieces.sort();
        for (piece, pi, qi) in &pieces {
            assert!(p[*pi as usize].contains(piece));
            assert!(q[*qi as usize].contains(piece));
        }
        assert_eq!(pieces.len(), 4);
    }

    #[test]
    fn refinement_with_identical_patterns() {
        let p = Pattern::new(vec![r("0,0"), r("0,1"), r("1,-")]).unwrap();
        let ref2 = p.common_refinement(&p);
        assert_eq!(ref2.rects(), p.rects());
    }
}
