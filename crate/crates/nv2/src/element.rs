//! Group elements of 2V as numbered pattern pairs.
//!
//! An element is a bijection between the rectangles of a domain pattern and
//! the rectangles of a range pattern; it acts on the square by the prefix
//! replacements `(d1 s, d2 t) -> (r1 s, r2 t)`. Composition acts on the
//! right: `x . (f g) = (x . f) . g`.

use crate::cantor::{refine_merge, validate_partition, Axis, BinaryWord, CantorError, DyadicRect, Pattern};
use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};

/// Errors from element construction and use.
#[derive(Debug, thiserror::Error)]
pub enum ElementError {
    #[error("point prefix too short to determine the containing rectangle")]
    PrefixTooShort,
    #[error("invalid element: {0}")]
    InvalidElement(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<CantorError> for ElementError {
    fn from(e: CantorError) -> Self {
        ElementError::InvalidElement(e.to_string())
    }
}

/// An element of 2V: pairs `(domain rectangle, range rectangle)`, kept
/// sorted by domain rectangle. Both sides form partitions of the square.
#[derive(Clone, PartialEq, Eq)]
pub struct Element {
    pairs: Vec<(DyadicRect, DyadicRect)>,
}

impl Element {
    #[must_use]
    pub fn identity() -> Self {
        Element { pairs: vec![(DyadicRect::unit(), DyadicRect::unit())] }
    }

    /// Build from rectangle pairs, checking that both sides are partitions.
    pub fn new(mut pairs: Vec<(DyadicRect, DyadicRect)>) -> Result<Self, ElementError> {
        let dom: Vec<DyadicRect> = pairs.iter().map(|(d, _)| d.clone()).collect();
        let ran: Vec<DyadicRect> = pairs.iter().map(|(_, r)| r.clone()).collect();
        validate_partition(&dom)
            .map_err(|e| ElementError::InvalidElement(format!("domain: {e}")))?;
        validate_partition(&ran)
            .map_err(|e| ElementError::InvalidElement(format!("range: {e}")))?;
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Element { pairs })
    }

    /// Build without the partition checks; both sides must already be
    /// partitions in bijection.
    #[must_use]
    pub fn from_pairs_unchecked(mut pairs: Vec<(DyadicRect, DyadicRect)>) -> Self {
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        Element { pairs }
    }

    #[must_use]
    pub fn pairs(&self) -> &[(DyadicRect, DyadicRect)] {
        &self.pairs
    }

    /// Number of rectangles in each pattern of the pair.
    #[must_use]
    pub fn rect_count(&self) -> usize {
        self.pairs.len()
    }

    /// Largest total address length over all rectangles of both patterns.
    /// Composing two elements refines patterns piece against piece, so this
    /// depth is subadditive: the composite never exceeds the sum of the two
    /// factors' depths. Inversion swaps the patterns and leaves it fixed.
    #[must_use]
    pub fn max_piece_depth(&self) -> u32 {
        self.pairs.iter().map(|(d, r)| d.size().max(r.size())).max().unwrap_or(0)
    }

    /// Largest address length on one axis over all rectangles of both
    /// patterns. Subadditive under composition for the same reason as
    /// [`Self::max_piece_depth`], axis by axis.
    #[must_use]
    pub fn max_word_len(&self, axis: Axis) -> u32 {
        self.pairs
            .iter()
            .map(|(d, r)| d.word(axis).len().max(r.word(axis).len()))
            .max()
            .unwrap_or(0)
    }

    #[must_use]
    pub fn dom_pattern(&self) -> Pattern {
        Pattern::from_rects_unchecked(self.pairs.iter().map(|(d, _)| d.clone()).collect())
    }

    #[must_use]
    pub fn ran_pattern(&self) -> Pattern {
        Pattern::from_rects_unchecked(self.pairs.iter().map(|(_, r)| r.clone()).collect())
    }

    /// True exactly when this pattern pair represents the identity map. Any
    /// representative of the identity pairs each rectangle with itself, so
    /// the pairwise test is complete even for unreduced pairs.
    #[must_use]
    pub fn is_identity(&self) -> bool {
        self.pairs.iter().all(|(d, r)| d == r)
    }

    /// True when `self` and `other` define the same map of the square,
    /// regardless of representative. Cost is one composition.
    #[must_use]
    pub fn same_map(&self, other: &Element) -> bool {
        if self.pairs == other.pairs {
            return true;
        }
        self.compose(&other.inverse()).is_identity()
    }

    /// Apply the element to a point given by a pair of word prefixes. The
    /// prefixes must be long enough to determine the containing domain
    /// rectangle; the image prefixes are returned.
    pub fn evaluate(
        &self,
        u1: &BinaryWord,
        u2: &BinaryWord,
    ) -> Result<(BinaryWord, BinaryWord), ElementError> {
        let (d, r) = self.lookup(u1, u2)?;
        let s1 = u1.strip_prefix(&d.w1).unwrap();
        let s2 = u2.strip_prefix(&d.w2).unwrap();
        Ok((r.w1.concat(&s1), r.w2.concat(&s2)))
    }

    /// The domain pair whose rectangle contains the point with the given
    /// prefixes. Binary search on the sorted pairs, verified, with a linear
    /// fallback for robustness.
    fn lookup(&self, u1: &BinaryWord, u2: &BinaryWord) -> Result<&(DyadicRect, DyadicRect), ElementError> {
        use std::cmp::Ordering;
        let before = |d: &DyadicRect| -> bool {
            // Is d strictly before the rectangle containing the point?
            match cmp_word_point(&d.w1, u1) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => cmp_word_point(&d.w2, u2) == Ordering::Less,
            }
        };
        let i = self.pairs.partition_point(|(d, _)| before(d));
        if let Some(p) = self.pairs.get(i) {
            if p.0.w1.is_prefix_of(u1) && p.0.w2.is_prefix_of(u2) {
                return Ok(p);
            }
        }
        // Either the prefixes are too short or the search comparator was
        // defeated; settle it exactly.
        for p in &self.pairs {
            if p.0.w1.is_prefix_of(u1) && p.0.w2.is_prefix_of(u2) {
                return Ok(p);
            }
        }
        Err(ElementError::PrefixTooShort)
    }

    /// Composition acting on the right: apply `self`, then `g`.
    #[must_use]
    pub fn compose(&self, g: &Element) -> Element {
        let f_ran: Vec<DyadicRect> = self.pairs.iter().map(|(_, r)| r.clone()).collect();
        let g_dom: Vec<DyadicRect> = g.pairs.iter().map(|(d, _)| d.clone()).collect();
        let pieces = refine_merge(&f_ran, &g_dom);
        let mut pairs = Vec::with_capacity(pieces.len());
        for (piece, fi, gi) in pieces {
            let (fd, fr) = &self.pairs[fi as usize];
            let (gd, gr) = &g.pairs[gi as usize];
            let (s1, s2) = piece.suffix_in(fr).expect("piece lies in its range rectangle");
            let dom = fd.append(&s1, &s2);
            let (t1, t2) = piece.suffix_in(gd).expect("piece lies in its domain rectangle");
            let ran = gr.append(&t1, &t2);
            pairs.push((dom, ran));
        }
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        Element { pairs }
    }

    #[must_use]
    pub fn inverse(&self) -> Element {
        let mut pairs: Vec<(DyadicRect, DyadicRect)> =
            self.pairs.iter().map(|(d, r)| (r.clone(), d.clone())).collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        Element { pairs }
    }

    /// Integer power by repeated squaring, with intermediate reduction.
    /// Negative exponents power the inverse.
    #[must_use]
    pub fn pow(&self, k: i64) -> Element {
        if k == 0 {
            return Element::identity();
        }
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = Element::identity();
        let mut sq = base;
        loop {
            if e & 1 == 1 {
                acc = acc.compose(&sq).reduce_pair();
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            sq = sq.compose(&sq).reduce_pair();
        }
        acc
    }

    /// Conjugate by the coordinate swap of the square: exchanges the roles
    /// of the two coordinates in every rectangle on both sides.
    #[must_use]
    pub fn mirror(&self) -> Element {
        let mut pairs: Vec<(DyadicRect, DyadicRect)> = self
            .pairs
            .iter()
            .map(|(d, r)| {
                (
                    DyadicRect::new(d.w2.clone(), d.w1.clone()),
                    DyadicRect::new(r.w2.clone(), r.w1.clone()),
                )
            })
            .collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        Element { pairs }
    }

    /// Merge sibling rectangle pairs mapped consistently, to a fixpoint.
    /// The result is a smaller representative of the same map. Merging is
    /// driven by a worklist with hashed sibling lookup, so the cost is near
    /// linear in the number of pairs.
    #[must_use]
    pub fn reduce_pair(&self) -> Element {
        use crate::cantor::Axis;
        let mut pairs: Vec<Option<(DyadicRect, DyadicRect)>> =
            self.pairs.iter().cloned().map(Some).collect();
        // Hash of the domain rectangle -> slot index. Lookups verify against
        // the actual rectangles, so a hash collision can only skip a merge,
        // never produce a wrong one.
        let mut by_dom: HashMap<u64, u32> = HashMap::with_capacity(pairs.len() * 2);
        for (i, p) in pairs.iter().enumerate() {
            by_dom.insert(rect_hash(&p.as_ref().unwrap().0), i as u32);
        }
        let mut work: Vec<u32> = (0..pairs.len() as u32).collect();
        while let Some(i) = work.pop() {
            let Some((d, r)) = pairs[i as usize].clone() else { continue };
            for axis in [Axis::Vertical, Axis::Horizontal] {
                // The half whose last bit is 0 initiates the merge.
                if d.word(axis).last() != Some(0) || r.word(axis).last() != Some(0) {
                    continue;
                }
                let sib_dom = with_flipped(&d, axis);
                let Some(&j) = by_dom.get(&rect_hash(&sib_dom)) else { continue };
                if j == i {
                    continue;
                }
                let Some((jd, jr)) = pairs[j as usize].as_ref() else { continue };
                if *jd != sib_dom || *jr != with_flipped(&r, axis) {
                    continue;
                }
                by_dom.remove(&rect_hash(&d));
                by_dom.remove(&rect_hash(&sib_dom));
                pairs[j as usize] = None;
                let nd = with_parent(&d, axis);
                let nr = with_parent(&r, axis);
                by_dom.insert(rect_hash(&nd), i);
                work.push(i);
                // The new rectangle may enable a merge whose initiator was
                // already processed: requeue the 0-side sibling if present.
                for ax in [Axis::Vertical, Axis::Horizontal] {
                    if nd.word(ax).last() == Some(1) {
                        if let Some(&k) = by_dom.get(&rect_hash(&with_flipped(&nd, ax))) {
                            work.push(k);
                        }
                    }
                }
                pairs[i as usize] = Some((nd, nr));
                break;
            }
        }
        let pairs: Vec<(DyadicRect, DyadicRect)> = pairs.into_iter().flatten().collect();
        Element::from_pairs_unchecked(pairs)
    }

    /// If the element maps `rect` affinely, return its image rectangle.
    /// The element may subdivide `rect`; all pieces must translate one
    /// common image rectangle. `None` when the restriction is not affine.
    #[must_use]
    pub fn maps_affinely(&self, rect: &DyadicRect) -> Option<DyadicRect> {
        let mut image: Option<DyadicRect> = None;
        // Relative sizes of the pieces covering `rect`; they must sum to
        // full measure, checked exactly by carrying doubled counts upward.
        let mut rel_sizes: Vec<u32> = Vec::new();
        for (d, r) in &self.pairs {
            let Some(piece) = d.intersect(rect) else { continue };
            let (s1, s2) = piece.suffix_in(d).unwrap();
            let img = r.append(&s1, &s2);
            let (t1, t2) = piece.suffix_in(rect).unwrap();
            let b1 = strip_suffix(&img.w1, &t1)?;
            let b2 = strip_suffix(&img.w2, &t2)?;
            let base = DyadicRect::new(b1, b2);
            match &image {
                None => image = Some(base),
                Some(s) if *s == base => {}
                Some(_) => return None,
            }
            rel_sizes.push(piece.size() - rect.size());
        }
        let max = *rel_sizes.iter().max()?;
        let mut counts = vec![0u64; max as usize + 1];
        for s in rel_sizes {
            counts[s as usize] += 1;
        }
        for s in (1..=max as usize).rev() {
            if counts[s] % 2 != 0 {
                return None;
            }
            counts[s - 1] += counts[s] / 2;
        }
        if counts[0] == 1 {
            image
        } else {
            None
        }
    }

    /// True when the supports of `self` and `other` are disjoint, where the
    /// support is over-approximated by the union of non-fixed rectangles of
    /// the reduced pair.
    #[must_use]
    pub fn support_disjoint(&self, other: &Element) -> bool {
        let a = self.reduce_pair();
        let b = other.reduce_pair();
        let moved = |e: &Element| -> Vec<DyadicRect> {
            e.pairs.iter().filter(|(d, r)| d != r).map(|(d, _)| d.clone()).collect()
        };
        let ma = moved(&a);
        let mb = moved(&b);
        ma.iter().all(|x| mb.iter().all(|y| !x.overlaps(y)))
    }

    /// Serialize: a header with the arity and the number of rectangles,
    /// then one `d1,d2 -> r1,r2` line per pair in canonical order.
    #[must_use]
    pub fn to_text(&self) -> String {
        let mut s = format!("n=2 m={}\n", self.pairs.len());
        for (d, r) in &self.pairs {
            s.push_str(&format!("{d} -> {r}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Element, ElementError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| ElementError::Parse("empty input".into()))?;
        let mut n = None;
        let mut m = None;
        for tok in header.split_whitespace() {
            if let Some(v) = tok.strip_prefix("n=") {
                n = v.parse::<u32>().ok();
            } else if let Some(v) = tok.strip_prefix("m=") {
                m = v.parse::<usize>().ok();
            }
        }
        if n != Some(2) {
            return Err(ElementError::Parse("header must declare n=2".into()));
        }
        let m = m.ok_or_else(|| ElementError::Parse("header must declare m=<count>".into()))?;
        let mut pairs = Vec::with_capacity(m);
        for line in lines {
            let (dom, ran) = line
                .split_once("->")
                .ok_or_else(|| ElementError::Parse(format!("line {line:?} lacks ->")))?;
            pairs.push((
                DyadicRect::parse(dom.trim()).map_err(ElementError::Parse)?,
                DyadicRect::parse(ran.trim()).map_err(ElementError::Parse)?,
            ));
        }
        if pairs.len() != m {
            return Err(ElementError::Parse(format!(
                "header declares m={m} but {} pairs follow",
                pairs.len()
            )));
        }
        Element::new(pairs)
    }

    /// A pseudorandom element built by splitting both patterns `splits`
    /// times and pairing the rectangles by a random bijection. Intended for
    /// tests and demonstrations.
    #[must_use]
    pub fn random_with<R: rand::Rng>(rng: &mut R, splits: u32) -> Element {
        use crate::cantor::Axis;
        let grow = |rng: &mut R| -> Vec<DyadicRect> {
            let mut rects = vec![DyadicRect::unit()];
            for _ in 0..splits {
                let i = rng.gen_range(0..rects.len());
                let axis = if rng.gen_bool(0.5) { Axis::Vertical } else { Axis::Horizontal };
                let (a, b) = rects[i].split(axis);
                rects[i] = a;
                rects.push(b);
            }
            rects
        };
        let dom = grow(rng);
        let mut ran = grow(rng);
        // Fisher-Yates pairing.
        for i in (1..ran.len()).rev() {
            let j = rng.gen_range(0..=i);
            ran.swap(i, j);
        }
        Element::from_pairs_unchecked(dom.into_iter().zip(ran).collect())
    }
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Element[")?;
        for (i, (d, r)) in self.pairs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{d} -> {r}")?;
        }
        write!(f, "]")
    }
}

/// Compare a rectangle word against a point prefix for the containing-rect
/// binary search: `Equal` when the word is a prefix of the point.
fn cmp_word_point(w: &BinaryWord, u: &BinaryWord) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    let n = w.len().min(u.len());
    for i in 0..n {
        match w.get(i).cmp(&u.get(i)) {
            Ordering::Equal => {}
            ord => return ord,
        }
    }
    if w.len() <= u.len() {
        Ordering::Equal
    } else {
        // Word extends the known prefix: treat as greater so the search
        // stops nearby; the caller verifies containment anyway.
        Ordering::Greater
    }
}

fn rect_hash(r: &DyadicRect) -> u64 {
    let mut h = DefaultHasher::new();
    r.hash(&mut h);
    h.finish()
}

/// The rectangle with the last bit of the `axis` word flipped.
fn with_flipped(r: &DyadicRect, axis: crate::cantor::Axis) -> DyadicRect {
    use crate::cantor::Axis;
    match axis {
        Axis::Vertical => DyadicRect::new(r.w1.with_last_flipped(), r.w2.clone()),
        Axis::Horizontal => DyadicRect::new(r.w1.clone(), r.w2.with_last_flipped()),
    }
}

/// The rectangle with the last bit of the `axis` word removed.
fn with_parent(r: &DyadicRect, axis: crate::cantor::Axis) -> DyadicRect {
    use crate::cantor::Axis;
    match axis {
        Axis::Vertical => DyadicRect::new(r.w1.parent(), r.w2.clone()),
        Axis::Horizontal => DyadicRect::new(r.w1.clone(), r.w2.parent()),
    }
}

/// `w` with the suffix `s` removed, if `w` ends with `s`.
fn strip_suffix(w: &BinaryWord, s: &BinaryWord) -> Option<BinaryWord> {
    if s.len() > w.len() {
        return None;
    }
    let cut = w.len() - s.len();
    if w.slice(cut, w.len()) == *s {
        Some(w.slice(0, cut))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::Axis;

    fn r(s: &str) -> DyadicRect {
        DyadicRect::parse(s).unwrap()
    }

    fn w(s: &str) -> BinaryWord {
        BinaryWord::parse(s).unwrap()
    }

    fn elem(pairs: &[(&str, &str)]) -> Element {
        Element::new(
            pairs
                .iter()
                .map(|(d, ran)| (r(d), r(ran)))
                .collect(),
        )
        .unwrap()
    }

    /// First-coordinate interval swap on halves: a convenient involution.
    fn half_swap() -> Element {
        elem(&[("0,-", "1,-"), ("1,-", "0,-")])
    }

    #[test]
    fn identity_and_evaluate() {
        let e = Element::identity();
        assert!(e.is_identity());
        let (a, b) = e.evaluate(&w("01"), &w("1")).unwrap();
        assert_eq!((a.to_string(), b.to_string()), ("01".into(), "1".into()));

        let s = half_swap();
        let (a, b) = s.evaluate(&w("01"), &w("11")).unwrap();
        assert_eq!((a.to_string(), b.to_string()), ("11".into(), "11".into()));
        assert!(matches!(
            s.evaluate(&w(""), &w("1")),
            Err(ElementError::PrefixTooShort)
        ));
    }

    #[test]
    fn compose_right_action() {
        // f splits the first coordinate; g splits the second. Their
        // composition evaluated pointwise must equal apply-f-then-g.
        let f = elem(&[("00,-", "0,-"), ("01,-", "10,-"), ("1,-", "11,-")]);
        let g = elem(&[("-,0", "-,00"), ("-,10", "-,01"), ("-,11", "-,1")]);
        let fg = f.compose(&g);
        for (u1, u2) in [("000", "00"), ("011", "10"), ("110", "111"), ("001", "01")] {
            let (a1, a2) = f.evaluate(&w(u1), &w(u2)).unwrap();
            let (b1, b2) = g.evaluate(&a1, &a2).unwrap();
            let (c1, c2) = fg.evaluate(&w(u1), &w(u2)).unwrap();
            assert_eq!((b1, b2), (c1, c2), "at point ({u1},{u2})");
        }
    }

    #[test]
    fn inverse_composes_to_identity() {
        let f = elem(&[("00,-", "0,-"), ("01,-", "10,-"), ("1,-", "11,-")]);
        assert!(f.compose(&f.inverse()).is_identity());
        assert!(f.inverse().compose(&f).is_identity());
        let s = half_swap();
        assert!(s.compose(&s).is_identity());
    }

    #[test]
    fn same_map_across_representatives() {
        let s = half_swap();
        // A finer representative of the same map.
        let fine = elem(&[("00,-", "10,-"), ("01,-", "11,-"), ("1,0", "0,0"), ("1,1", "0,1")]);
        assert!(s.same_map(&fine));
        assert!(!s.same_map(&Element::identity()));
    }

    #[test]
    fn reduce_pair_collapses_siblings() {
        let fine = elem(&[("00,-", "10,-"), ("01,-", "11,-"), ("1,0", "0,0"), ("1,1", "0,1")]);
        let red = fine.reduce_pair();
        assert_eq!(red.rect_count(), 2);
        assert!(red.same_map(&fine));
        // Unreduced identity collapses all the way.
        let mut e = Element::identity();
        let s = half_swap();
        e = e.compose(&s).compose(&s);
        assert!(e.is_identity());
        assert_eq!(e.reduce_pair().rect_count(), 1);
    }

    #[test]
    fn maps_affinely_cases() {
        let s = half_swap();
        assert_eq!(s.maps_affinely(&r("0,-")).unwrap().to_string(), "1,-");
        assert_eq!(s.maps_affinely(&r("01,1")).unwrap().to_string(), "11,1");
        // The half swap translates each half differently: not affine on the
        // whole square, although it maps it onto itself.
        assert!(s.maps_affinely(&DyadicRect::unit()).is_none());
        assert_eq!(
            Element::identity().maps_affinely(&DyadicRect::unit()).unwrap().to_string(),
            "-,-"
        );
        let f = elem(&[("00,-", "0,-"), ("01,-", "10,-"), ("1,-", "11,-")]);
        // Pieces 00 and 01 map with different stretch: not affine on 0.
        assert!(f.maps_affinely(&r("0,-")).is_none());
        assert_eq!(f.maps_affinely(&r("00,-")).unwrap().to_string(), "0,-");
        assert_eq!(f.maps_affinely(&DyadicRect::unit()), None);
    }

    #[test]
    fn support_disjointness() {
        let left = elem(&[("00,-", "01,-"), ("01,-", "00,-"), ("1,-", "1,-")]);
        let right = elem(&[("0,-", "0,-"), ("10,-", "11,-"), ("11,-", "10,-")]);
        assert!(left.support_disjoint(&right));
        assert!(!left.support_disjoint(&left));
        assert!(left.support_disjoint(&Element::identity()));
    }

    #[test]
    fn text_round_trip() {
        let f = elem(&[("00,-", "0,-"), ("01,1", "10,1"), ("01,0", "10,0"), ("1,-", "11,-")]);
        let text = f.to_text();
        assert!(text.starts_with("n=2 m=4\n"));
        let back = Element::parse(&text).unwrap();
        assert_eq!(back.pairs(), f.pairs());
        assert!(Element::parse("n=2 m=1\n0,- -> 0,-").is_err());
        assert!(Element::parse("n=3 m=1\n-,- -> -,-").is_err());
    }

    #[test]
    fn random_elements_are_valid() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let e = Element::random_with(&mut rng, 6);
            let dom: Vec<DyadicRect> = e.pairs().iter().map(|(d, _)| d.clone()).collect();
            let ran: Vec<DyadicRect> = e.pairs().iter().map(|(_, x)| x.clone()).collect();
            assert!(validate_partition(&dom).is_ok());
            assert!(validate_partition(&ran).is_ok());
            assert!(e.compose(&e.inverse()).is_identity());
        }
    }

    #[test]
    fn compose_via_subdivision_refines() {
        // Composing with a subdivided identity representative leaves
        // the map unchanged but not the representative.
        let u = DyadicRect::unit();
        let (a, b) = u.split(Axis::Vertical);
        let id_fine = Element::from_pairs_unchecked(vec![(a.clone(), a), (b.clone(), b)]);
        let s = half_swap();
        let c = s.compose(&id_fine);
        assert!(c.same_map(&s));
    }
}
