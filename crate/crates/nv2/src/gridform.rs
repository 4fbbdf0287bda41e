//! Grid diagrams and the canonical (reduced grid diagram) form.
//!
//! A grid diagram is a representative of an element whose range pattern is a
//! full product grid: the product of a partition of the first coordinate by
//! words `v_i` and one of the second coordinate by words `h_j`. Applying
//! global reductions until none applies yields the unique reduced grid
//! diagram, which serves as the canonical form: equality of elements is
//! byte equality of the serialized reduced diagram.

use crate::cantor::{BinaryWord, DyadicRect};
use crate::element::Element;
use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("strip {0} does not exist on that axis")]
    StripNotFound(usize),
    #[error("rectangle {0} is not a rectangle of the range pattern")]
    RectNotInRange(DyadicRect),
}

/// An element whose range pattern is the product grid `{v_i} x {h_j}`.
/// `dom[i * h.len() + j]` is the domain rectangle mapped onto `(v_i, h_j)`.
#[derive(Clone, PartialEq, Eq)]
pub struct GridDiagram {
    v: Vec<BinaryWord>,
    h: Vec<BinaryWord>,
    dom: Vec<DyadicRect>,
    reduced: bool,
}

impl GridDiagram {
    #[must_use]
    pub fn v_words(&self) -> &[BinaryWord] {
        &self.v
    }

    #[must_use]
    pub fn h_words(&self) -> &[BinaryWord] {
        &self.h
    }

    #[must_use]
    pub fn is_reduced(&self) -> bool {
        self.reduced
    }

    #[must_use]
    pub fn cell_count(&self) -> usize {
        self.dom.len()
    }

    fn cell(&self, i: usize, j: usize) -> &DyadicRect {
        &self.dom[i * self.h.len() + j]
    }

    /// The diagram as a plain element.
    #[must_use]
    pub fn to_element(&self) -> Element {
        let mut pairs = Vec::with_capacity(self.dom.len());
        for (i, vw) in self.v.iter().enumerate() {
            for (j, hw) in self.h.iter().enumerate() {
                pairs.push((self.cell(i, j).clone(), DyadicRect::new(vw.clone(), hw.clone())));
            }
        }
        Element::from_pairs_unchecked(pairs)
    }

    /// Fineness of the range pattern: the largest cell size of the grid.
    #[must_use]
    pub fn range_fineness(&self) -> u32 {
        let mv = self.v.iter().map(BinaryWord::len).max().unwrap_or(0);
        let mh = self.h.iter().map(BinaryWord::len).max().unwrap_or(0);
        mv + mh
    }

    /// Canonical text form: the element serialization with cells listed in
    /// grid order (by vertical strip, then horizontal strip).
    #[must_use]
    pub fn to_text(&self) -> String {
        let mut s = format!("n=2 m={}\n", self.dom.len());
        for (i, vw) in self.v.iter().enumerate() {
            for (j, hw) in self.h.iter().enumerate() {
                s.push_str(&format!("{} -> {},{}\n", self.cell(i, j), vw, hw));
            }
        }
        s
    }

    /// Split strip `index` along `axis` into its two halves, refining the
    /// domain so the represented map is unchanged.
    pub fn global_subdivide(
        &self,
        axis: crate::cantor::Axis,
        index: usize,
    ) -> Result<GridDiagram, GridError> {
        use crate::cantor::Axis;
        let hn = self.h.len();
        match axis {
            Axis::Vertical => {
                if index >= self.v.len() {
                    return Err(GridError::StripNotFound(index));
                }
                let mut v = self.v.clone();
                let w = v[index].clone();
                v.splice(index..=index, [w.child(0), w.child(1)]);
                let mut dom = Vec::with_capacity((self.v.len() + 1) * hn);
                for i in 0..self.v.len() {
                    if i == index {
                        for b in 0..2 {
                            for j in 0..hn {
                                let d = self.cell(i, j);
                                dom.push(DyadicRect::new(d.w1.child(b), d.w2.clone()));
                            }
                        }
                    } else {
                        for j in 0..hn {
                            dom.push(self.cell(i, j).clone());
                        }
                    }
                }
                Ok(GridDiagram::with_reduced_flag(v, self.h.clone(), dom))
            }
            Axis::Horizontal => {
                if index >= hn {
                    return Err(GridError::StripNotFound(index));
                }
                let mut h = self.h.clone();
                let w = h[index].clone();
                h.splice(index..=index, [w.child(0), w.child(1)]);
                let mut dom = Vec::with_capacity(self.v.len() * (hn + 1));
                for i in 0..self.v.len() {
                    for j in 0..hn {
                        let d = self.cell(i, j);
                        if j == index {
                            dom.push(DyadicRect::new(d.w1.clone(), d.w2.child(0)));
                            dom.push(DyadicRect::new(d.w1.clone(), d.w2.child(1)));
                        } else {
                            dom.push(d.clone());
                        }
                    }
                }
                Ok(GridDiagram::with_reduced_flag(self.v.clone(), h, dom))
            }
        }
    }

    fn with_reduced_flag(v: Vec<BinaryWord>, h: Vec<BinaryWord>, dom: Vec<DyadicRect>) -> Self {
        let mut gd = GridDiagram { v, h, dom, reduced: false };
        gd.reduced = gd.find_merge().is_none();
        gd
    }

    /// First applicable global reduction, if any: merging strips `i`, `i+1`
    /// on the given axis keeps the map iff every cross-strip pair of domain
    /// partners consists of same-axis siblings in order.
    fn find_merge(&self) -> Option<(crate::cantor::Axis, usize)> {
        use crate::cantor::Axis;
        for i in 0..self.v.len().saturating_sub(1) {
            if self.column_mergeable(i) {
                return Some((Axis::Vertical, i));
            }
        }
        for j in 0..self.h.len().saturating_sub(1) {
            if self.row_mergeable(j) {
                return Some((Axis::Horizontal, j));
            }
        }
        None
    }

    fn all_merges(&self) -> Vec<(crate::cantor::Axis, usize)> {
        use crate::cantor::Axis;
        let mut out = Vec::new();
        for i in 0..self.v.len().saturating_sub(1) {
            if self.column_mergeable(i) {
                out.push((Axis::Vertical, i));
            }
        }
        for j in 0..self.h.len().saturating_sub(1) {
            if self.row_mergeable(j) {
                out.push((Axis::Horizontal, j));
            }
        }
        out
    }

    fn column_mergeable(&self, i: usize) -> bool {
        let (a, b) = (&self.v[i], &self.v[i + 1]);
        if a.len() != b.len() || a.last() != Some(0) || *b != a.with_last_flipped() {
            return false;
        }
        (0..self.h.len()).all(|j| {
            let d0 = self.cell(i, j);
            let d1 = self.cell(i + 1, j);
            d0.w1.last() == Some(0)
                && d1.w1 == d0.w1.with_last_flipped()
                && d0.w2 == d1.w2
        })
    }

    fn row_mergeable(&self, j: usize) -> bool {
        let (a, b) = (&self.h[j], &self.h[j + 1]);
        if a.len() != b.len() || a.last() != Some(0) || *b != a.with_last_flipped() {
            return false;
        }
        (0..self.v.len()).all(|i| {
            let d0 = self.cell(i, j);
            let d1 = self.cell(i, j + 1);
            d0.w2.last() == Some(0)
                && d1.w2 == d0.w2.with_last_flipped()
                && d0.w1 == d1.w1
        })
    }

    fn apply_merge(&self, m: (crate::cantor::Axis, usize)) -> GridDiagram {
        use crate::cantor::Axis;
        let hn = self.h.len();
        match m {
            (Axis::Vertical, i) => {
                let mut v = self.v.clone();
                let parent = v[i].parent();
                v.splice(i..=i + 1, [parent]);
                let mut dom = Vec::with_capacity((self.v.len() - 1) * hn);
                for x in 0..self.v.len() {
                    if x == i + 1 {
                        continue;
                    }
                    for j in 0..hn {
                        let d = self.cell(x, j);
                        if x == i {
                            dom.push(DyadicRect::new(d.w1.parent(), d.w2.clone()));
                        } else {
                            dom.push(d.clone());
                        }
                    }
                }
                GridDiagram { v, h: self.h.clone(), dom, reduced: false }
            }
            (Axis::Horizontal, j) => {
                let mut h = self.h.clone();
                let parent = h[j].parent();
                h.splice(j..=j + 1, [parent]);
                let mut dom = Vec::with_capacity(self.v.len() * (hn - 1));
                for i in 0..self.v.len() {
                    for y in 0..hn {
                        if y == j + 1 {
                            continue;
                        }
                        let d = self.cell(i, y);
                        if y == j {
                            dom.push(DyadicRect::new(d.w1.clone(), d.w2.parent()));
                        } else {
                            dom.push(d.clone());
                        }
                    }
                }
                GridDiagram { v: self.v.clone(), h, dom, reduced: false }
            }
        }
    }
}

impl fmt::Debug for GridDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GridDiagram(v={:?}, h={:?})", self.v, self.h)
    }
}

/// The coarsest complete prefix code refining every word in `words`: the
/// leaves of the binary trie of the words, with missing siblings added.
fn complete_code(words: &mut Vec<BinaryWord>) -> Vec<BinaryWord> {
    words.sort();
    words.dedup();
    let mut out = Vec::new();
    let mut path = BinaryWord::empty();
    // (lo, hi): the sorted words extending the current path strictly.
    fn rec(words: &[BinaryWord], lo: usize, hi: usize, path: &mut BinaryWord, out: &mut Vec<BinaryWord>) {
        if lo == hi {
            out.push(path.clone());
            return;
        }
        // Skip a word equal to the path itself: extensions still force splits.
        let lo = if words[lo].len() == path.len() { lo + 1 } else { lo };
        if lo == hi {
            out.push(path.clone());
            return;
        }
        let d = path.len();
        let mid = words[lo..hi].partition_point(|w| w.get(d) == 0) + lo;
        path.push(0);
        rec(words, lo, mid, path, out);
        path.pop();
        path.push(1);
        rec(words, mid, hi, path, out);
        path.pop();
    }
    rec(words, 0, words.len(), &mut path, &mut out);
    out
}

/// A grid diagram representing the same map as `g`, whose grid is built from
/// the coarsest word sets covering all range rectangles.
#[must_use]
pub fn to_grid_diagram(g: &Element) -> GridDiagram {
    let mut w1s: Vec<BinaryWord> = g.pairs().iter().map(|(_, r)| r.w1.clone()).collect();
    let mut w2s: Vec<BinaryWord> = g.pairs().iter().map(|(_, r)| r.w2.clone()).collect();
    let v = complete_code(&mut w1s);
    let h = complete_code(&mut w2s);
    let mut dom: Vec<Option<DyadicRect>> = vec![None; v.len() * h.len()];
    for (d, r) in g.pairs() {
        let vlo = v.partition_point(|w| *w < r.w1);
        let hlo = h.partition_point(|w| *w < r.w2);
        let mut vi = vlo;
        while vi < v.len() && r.w1.is_prefix_of(&v[vi]) {
            let s1 = v[vi].strip_prefix(&r.w1).unwrap();
            let mut hj = hlo;
            while hj < h.len() && r.w2.is_prefix_of(&h[hj]) {
                let s2 = h[hj].strip_prefix(&r.w2).unwrap();
                dom[vi * h.len() + hj] = Some(d.append(&s1, &s2));
                hj += 1;
            }
            vi += 1;
        }
    }
    let dom: Vec<DyadicRect> = dom
        .into_iter()
        .map(|c| c.expect("grid cell covered by a range rectangle"))
        .collect();
    GridDiagram::with_reduced_flag(v, h, dom)
}

/// Apply global reductions until none applies. By uniqueness of the reduced
/// grid diagram, the result does not depend on the merge order.
#[must_use]
pub fn reduce_grid(gd: &GridDiagram) -> GridDiagram {
    let mut cur = gd.clone();
    while let Some(m) = cur.find_merge() {
        cur = cur.apply_merge(m);
    }
    cur.reduced = true;
    cur
}

/// Like [`reduce_grid`], but at every step chooses uniformly among all
/// currently applicable merges. Exists to validate order-confluence.
#[must_use]
pub fn reduce_grid_shuffled<R: rand::Rng>(gd: &GridDiagram, rng: &mut R) -> GridDiagram {
    let mut cur = gd.clone();
    loop {
        let ms = cur.all_merges();
        if ms.is_empty() {
            break;
        }
        let m = ms[rng.gen_range(0..ms.len())];
        cur = cur.apply_merge(m);
    }
    cur.reduced = true;
    cur
}

/// The unique reduced grid diagram of `g`: the canonical form.
#[must_use]
pub fn normal_form(g: &Element) -> GridDiagram {
    reduce_grid(&to_grid_diagram(g))
}

/// Canonical byte key of an element: the serialization of its reduced grid
/// diagram.
#[must_use]
pub fn canonical_key(g: &Element) -> String {
    normal_form(g).to_text()
}

/// Canonical equality: equal reduced grid diagrams.
#[must_use]
pub fn equals(f: &Element, g: &Element) -> bool {
    normal_form(f) == normal_form(g)
}

/// Fineness of an element: the fineness of the range pattern of its reduced
/// grid diagram.
#[must_use]
pub fn element_fineness(g: &Element) -> u32 {
    normal_form(g).range_fineness()
}

/// Word-length lower bound from fineness: the length of `g` is at least
/// fineness/8, hence at least this ceiling.
#[must_use]
pub fn length_lower_bound(g: &Element) -> u32 {
    element_fineness(g).div_ceil(8)
}

/// Per-rectangle variant: an essential rectangle of size `k` in a range
/// pattern of `g` certifies word length at least `k/8`.
#[must_use]
pub fn rect_length_bound(r: &DyadicRect) -> u32 {
    r.size().div_ceil(8)
}

/// The outcome of the essentiality test for a range rectangle.
#[derive(Clone, Debug)]
pub struct EssentialWitness {
    pub rect: DyadicRect,
    /// Congruent neighbor with the last first-coordinate bit flipped.
    pub rv: Option<DyadicRect>,
    /// Congruent neighbor with the last second-coordinate bit flipped.
    pub rh: Option<DyadicRect>,
    /// Whether the vertical-reduction condition holds (so `rect` could merge
    /// with `rv`).
    pub cond_v: bool,
    /// Whether the horizontal-reduction condition holds.
    pub cond_h: bool,
    pub essential: bool,
}

/// Evaluate both reduction conditions for a rectangle of the range pattern
/// of `g`. The rectangle is essential when neither condition holds; a
/// condition whose neighbor is undefined (empty word in that coordinate)
/// counts as failed. The degenerate whole-square rectangle is never
/// essential.
pub fn is_essential(g: &Element, r: &DyadicRect) -> Result<EssentialWitness, GridError> {
    let found = g.pairs().iter().find(|(_, ran)| ran == r);
    let Some((d, _)) = found else {
        return Err(GridError::RectNotInRange(r.clone()));
    };
    Ok(essential_conditions(&g.inverse(), d, r))
}

/// Core of the essentiality test, usable with any rectangle on which the
/// inverse acts affinely with image `d`.
#[must_use]
pub(crate) fn essential_conditions(
    inv: &Element,
    d: &DyadicRect,
    r: &DyadicRect,
) -> EssentialWitness {
    let rv = if r.w1.is_empty() {
        None
    } else {
        Some(DyadicRect::new(r.w1.with_last_flipped(), r.w2.clone()))
    };
    let rh = if r.w2.is_empty() {
        None
    } else {
        Some(DyadicRect::new(r.w1.clone(), r.w2.with_last_flipped()))
    };
    let cond_v = match &rv {
        None => false,
        Some(rv) => {
            !d.w1.is_empty()
                && d.w1.last() == r.w1.last()
                && inv.maps_affinely(rv)
                    == Some(DyadicRect::new(d.w1.with_last_flipped(), d.w2.clone()))
        }
    };
    let cond_h = match &rh {
        None => false,
        Some(rh) => {
            !d.w2.is_empty()
                && d.w2.last() == r.w2.last()
                && inv.maps_affinely(rh)
                    == Some(DyadicRect::new(d.w1.clone(), d.w2.with_last_flipped()))
        }
    };
    let degenerate = r.w1.is_empty() && r.w2.is_empty();
    EssentialWitness {
        rect: r.clone(),
        rv,
        rh,
        cond_v,
        cond_h,
        essential: !degenerate && !cond_v && !cond_h,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::Axis;
    use rand::SeedableRng;

    fn r(s: &str) -> DyadicRect {
        DyadicRect::parse(s).unwrap()
    }

    fn elem(pairs: &[(&str, &str)]) -> Element {
        Element::new(pairs.iter().map(|(d, ran)| (r(d), r(ran))).collect()).unwrap()
    }

    #[test]
    fn identity_normal_form() {
        let nf = normal_form(&Element::identity());
        assert_eq!(nf.cell_count(), 1);
        assert_eq!(nf.range_fineness(), 0);
        assert!(nf.is_reduced());
        assert_eq!(element_fineness(&Element::identity()), 0);
        assert_eq!(length_lower_bound(&Element::identity()), 0);
    }

    #[test]
    fn unreduced_identity_reduces() {
        let a = r("0,-");
        let b = r("1,-");
        let fine = Element::from_pairs_unchecked(vec![(a.clone(), a), (b.clone(), b)]);
        let nf = normal_form(&fine);
        assert_eq!(nf.cell_count(), 1);
        assert!(equals(&fine, &Element::identity()));
    }

    #[test]
    fn grid_construction_covers_crossed_structure() {
        // Range rects are not a grid: one column split, other not.
        let g = elem(&[("0,0", "0,0"), ("0,1", "0,1"), ("1,-", "1,-")]);
        let gd = to_grid_diagram(&g);
        assert_eq!(gd.v_words().len(), 2);
        assert_eq!(gd.h_words().len(), 2);
        assert_eq!(gd.cell_count(), 4);
        assert!(gd.to_element().same_map(&g));
    }

    #[test]
    fn grid_of_grid_unchanged() {
        let g = elem(&[("0,0", "0,0"), ("0,1", "1,0"), ("1,0", "0,1"), ("1,1", "1,1")]);
        let gd = to_grid_diagram(&g);
        assert_eq!(gd.cell_count(), 4);
        assert!(gd.to_element().same_map(&g));
    }

    #[test]
    fn subdivide_then_reduce_restores() {
        let g = elem(&[("00,-", "0,-"), ("01,-", "10,-"), ("1,-", "11,-")]);
        let nf = normal_form(&g);
        let finer = nf.global_subdivide(Axis::Vertical, 0).unwrap();
        assert!(!finer.is_reduced());
        let finer2 = finer.global_subdivide(Axis::Horizontal, 0).unwrap();
        assert!(finer2.to_element().same_map(&g));
        assert_eq!(reduce_grid(&finer2), nf);
        assert!(nf.global_subdivide(Axis::Vertical, 99).is_err());
    }

    #[test]
    fn equals_and_keys() {
        let g = elem(&[("00,-", "0,-"), ("01,-", "10,-"), ("1,-", "11,-")]);
        let h = g.compose(&Element::identity());
        assert!(equals(&g, &h));
        assert_eq!(canonical_key(&g), canonical_key(&h));
        assert!(!equals(&g, &Element::identity()));
        assert!(equals(&g.compose(&g.inverse()), &Element::identity()));
    }

    #[test]
    fn confluence_on_random_elements() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let g = Element::random_with(&mut rng, 5);
            let gd = to_grid_diagram(&g);
            let base = reduce_grid(&gd);
            for _ in 0..4 {
                let alt = reduce_grid_shuffled(&gd, &mut rng);
                assert_eq!(alt, base);
            }
            assert_eq!(reduce_grid(&base), base);
            assert!(base.to_element().same_map(&g));
        }
    }

    #[test]
    fn fineness_of_nested_subdivision() {
        // Three nested vertical splits at the corner: fineness 3.
        let g = elem(&[
            ("000,-", "001,-"),
            ("001,-", "000,-"),
            ("01,-", "01,-"),
            ("1,-", "1,-"),
        ]);
        assert_eq!(element_fineness(&g), 3);
        assert_eq!(length_lower_bound(&g), 1);
        assert_eq!(rect_length_bound(&r("000,11")), 1);
        assert_eq!(rect_length_bound(&r("00000000,11111111")), 2);
    }

    #[test]
    fn essential_identity_rects() {
        let id = Element::identity();
        let w = is_essential(&id, &DyadicRect::unit()).unwrap();
        assert!(!w.essential);
        assert!(is_essential(&id, &r("0,-")).is_err());
        // Subdivided identity: children reduce away.
        let a = r("0,-");
        let b = r("1,-");
        let fine = Element::from_pairs_unchecked(vec![(a.clone(), a.clone()), (b.clone(), b)]);
        let w = is_essential(&fine, &r("0,-")).unwrap();
        assert!(w.cond_v && !w.essential);
    }

    #[test]
    fn essential_on_nontrivial_corner() {
        // Swap of two corner cells: the moved range rect cannot be merged
        // with either neighbor.
        let g = elem(&[("00,0", "00,1"), ("00,1", "00,0"), ("01,-", "01,-"), ("1,-", "1,-")]);
        let w = is_essential(&g, &r("00,0")).unwrap();
        assert!(w.essential, "{w:?}");
        assert_eq!(w.rv.as_ref().unwrap().to_string(), "01,0");
        assert_eq!(w.rh.as_ref().unwrap().to_string(), "00,1");
    }

    #[test]
    fn essential_after_artificial_subdivision() {
        let g = elem(&[("00,-", "0,-"), ("01,-", "10,-"), ("1,-", "11,-")]);
        // Subdivide domain rect 00 and range rect 0 together.
        let fine = elem(&[
            ("000,-", "00,-"),
            ("001,-", "01,-"),
            ("01,-", "10,-"),
            ("1,-", "11,-"),
        ]);
        assert!(fine.same_map(&g));
        let w = is_essential(&fine, &r("00,-")).unwrap();
        assert!(w.cond_v && !w.essential);
        let w = is_essential(&fine, &r("01,-")).unwrap();
        assert!(w.cond_v && !w.essential);
    }
}
