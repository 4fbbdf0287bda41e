//! Exact word metric by breadth-first search over the Cayley graph, with
//! canonical-form deduplication, plus certified length intervals.
//!
//! The search composes on the right: a node at distance d expands to
//! `node * s` and `node * s^-1` for every generator symbol `s`, so the word
//! read along a BFS tree branch is a genuine path in the Cayley graph and
//! every prefix of a witness word is itself a vertex on that path.

use crate::element::Element;
use crate::genset::{GeneratorTable, GroupWord};
use crate::gridform;
use sha2::{Digest, Sha256};
use std::collections::HashMap;

pub const DEFAULT_NODE_CAP: usize = 5_000_000;

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("node budget exhausted after {0} nodes")]
    ResourceBudgetExceeded(usize),
    #[error("element not found within radius {0}")]
    NotWithinRadius(u32),
}

/// One BFS tree edge: which generator (by table order) and which sign.
#[derive(Clone, Copy, Debug)]
struct Move {
    gen: u16,
    sign: i8,
}

#[derive(Clone, Debug)]
struct Node {
    dist: u32,
    parent: Option<(u128, Move)>,
}

/// A completed breadth-first ball: every element within `radius`, keyed by
/// a 128-bit digest of the canonical form, each with a geodesic witness
/// recoverable from the BFS tree.
pub struct BallTable {
    radius: u32,
    nodes: HashMap<u128, Node>,
    symbols: Vec<String>,
    level_sizes: Vec<usize>,
}

/// 128-bit key of the canonical (reduced grid diagram) serialization.
/// Truncating SHA-256 keeps the table compact; a collision would need
/// ~2^64 distinct elements, far beyond any feasible ball.
#[must_use]
pub fn canonical_digest(g: &Element) -> u128 {
    let text = gridform::canonical_key(g);
    let h = Sha256::digest(text.as_bytes());
    u128::from_be_bytes(h[..16].try_into().unwrap())
}

impl BallTable {
    #[must_use]
    pub fn radius(&self) -> u32 {
        self.radius
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of elements at exactly the given distance.
    #[must_use]
    pub fn level_size(&self, dist: u32) -> usize {
        self.level_sizes.get(dist as usize).copied().unwrap_or(0)
    }

    #[must_use]
    pub fn distance(&self, g: &Element) -> Option<u32> {
        self.distance_of_key(canonical_digest(g))
    }

    #[must_use]
    pub fn distance_of_key(&self, key: u128) -> Option<u32> {
        self.nodes.get(&key).map(|n| n.dist)
    }

    /// The BFS-tree word from the identity to the stored node.
    #[must_use]
    pub fn witness_for_key(&self, key: u128) -> Option<GroupWord> {
        let mut moves = Vec::new();
        let mut cur = self.nodes.get(&key)?;
        loop {
            match &cur.parent {
                None => break,
                Some((pkey, mv)) => {
                    moves.push(*mv);
                    cur = &self.nodes[pkey];
                }
            }
        }
        moves.reverse();
        let mut w = GroupWord::empty();
        for mv in moves {
            w.push(&self.symbols[mv.gen as usize], mv.sign);
        }
        Some(w)
    }

    #[must_use]
    pub fn witness(&self, g: &Element) -> Option<GroupWord> {
        self.witness_for_key(canonical_digest(g))
    }

    /// All stored (key, distance) pairs, for export.
    pub fn entries(&self) -> impl Iterator<Item = (u128, u32)> + '_ {
        self.nodes.iter().map(|(k, n)| (*k, n.dist))
    }
}

/// Breadth-first ball of the given radius with the default node cap.
pub fn ball(radius: u32, table: &GeneratorTable) -> Result<BallTable, MetricError> {
    ball_with_cap(radius, table, DEFAULT_NODE_CAP)
}

/// Level-synchronous BFS; only the current frontier keeps elements in
/// memory, settled nodes keep just distance and tree edge.
pub fn ball_with_cap(
    radius: u32,
    table: &GeneratorTable,
    node_cap: usize,
) -> Result<BallTable, MetricError> {
    let symbols: Vec<String> = table.symbols().to_vec();
    let gens: Vec<Element> = symbols
        .iter()
        .map(|s| table.get(s).expect("listed symbol").element.clone())
        .collect();
    let invs: Vec<Element> = gens.iter().map(Element::inverse).collect();
    let mut nodes = HashMap::new();
    let id = Element::identity();
    let id_key = canonical_digest(&id);
    nodes.insert(id_key, Node { dist: 0, parent: None });
    let mut level_sizes = vec![1usize];
    let mut frontier: Vec<(u128, Element)> = vec![(id_key, id)];
    for dist in 1..=radius {
        let mut next: Vec<(u128, Element)> = Vec::new();
        for (pkey, el) in &frontier {
            for (gi, (g, ginv)) in gens.iter().zip(&invs).enumerate() {
                for (sign, gen_el) in [(1i8, g), (-1i8, ginv)] {
                    let child = el.compose(gen_el).reduce_pair();
                    let key = canonical_digest(&child);
                    if nodes.contains_key(&key) {
                        continue;
                    }
                    if nodes.len() >= node_cap {
                        return Err(MetricError::ResourceBudgetExceeded(nodes.len()));
                    }
                    nodes.insert(
                        key,
                        Node { dist, parent: Some((*pkey, Move { gen: gi as u16, sign })) },
                    );
                    next.push((key, child));
                }
            }
        }
        level_sizes.push(next.len());
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(BallTable { radius, nodes, symbols, level_sizes })
}

/// A certified interval for the word length of an element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LengthCertificate {
    pub lower: u32,
    /// Length of the best known witness word; `None` when no witness exists.
    pub upper: Option<u32>,
    pub exact: bool,
}

/// Certify a length against a prebuilt ball, optionally together with a
/// known witness word for the upper bound.
#[must_use]
pub fn certify(
    ball: &BallTable,
    g: &Element,
    known_witness: Option<&GroupWord>,
) -> LengthCertificate {
    let witness_len = known_witness.map(|w| w.len() as u32);
    match ball.distance(g) {
        Some(d) => LengthCertificate { lower: d, upper: Some(d), exact: true },
        None => {
            let lower = (ball.radius() + 1).max(gridform::length_lower_bound(g));
            LengthCertificate { lower, upper: witness_len, exact: false }
        }
    }
}

/// Exact distance when `g` lies within `max_radius`, otherwise a certified
/// interval whose lower bound combines BFS exhaustion with the fineness
/// bound.
pub fn exact_length(
    g: &Element,
    table: &GeneratorTable,
    max_radius: u32,
) -> Result<LengthCertificate, MetricError> {
    let b = ball(max_radius, table)?;
    Ok(certify(&b, g, None))
}

/// A geodesic witness word from a prebuilt ball.
pub fn geodesic_in(ball: &BallTable, g: &Element) -> Result<GroupWord, MetricError> {
    ball.witness(g).ok_or(MetricError::NotWithinRadius(ball.radius()))
}

/// A geodesic witness word, searching out to `max_radius`.
pub fn geodesic_word(
    g: &Element,
    table: &GeneratorTable,
    max_radius: u32,
) -> Result<GroupWord, MetricError> {
    let b = ball(max_radius, table)?;
    geodesic_in(&b, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genset::{load_generators, word_to_element, DEFAULT_GENERATORS};
    use crate::treealg;

    fn table() -> GeneratorTable {
        load_generators(DEFAULT_GENERATORS).unwrap()
    }

    #[test]
    fn radius_zero_and_one() {
        let t = table();
        let b0 = ball(0, &t).unwrap();
        assert_eq!(b0.len(), 1);
        assert_eq!(b0.distance(&Element::identity()), Some(0));
        assert_eq!(b0.witness(&Element::identity()).unwrap().len(), 0);

        let b1 = ball(1, &t).unwrap();
        // Count distinct non-trivial canonical forms among generators and
        // inverses directly.
        let mut keys = std::collections::HashSet::new();
        for s in t.symbols() {
            let g = &t.get(s).unwrap().element;
            keys.insert(canonical_digest(g));
            keys.insert(canonical_digest(&g.inverse()));
        }
        keys.remove(&canonical_digest(&Element::identity()));
        assert_eq!(b1.len(), 1 + keys.len());
        assert_eq!(b1.level_size(1), keys.len());
        for s in t.symbols() {
            let g = &t.get(s).unwrap().element;
            assert_eq!(b1.distance(g), Some(1), "{s}");
            let w = b1.witness(g).unwrap();
            assert_eq!(w.len(), 1);
            assert!(word_to_element(&w, &t).unwrap().same_map(g));
        }
    }

    #[test]
    fn ball_two_properties() {
        let t = table();
        let b = ball(2, &t).unwrap();
        assert!(b.level_size(1) > 0 && b.level_size(2) > 0);
        assert!(b.len() > 1 + b.level_size(1));
        // Witness words evaluate back to elements at their stated distance,
        // and inverses sit at the same distance.
        let mut checked = 0;
        for (key, dist) in b.entries() {
            let w = b.witness_for_key(key).unwrap();
            assert_eq!(w.len() as u32, dist);
            let g = word_to_element(&w, &t).unwrap();
            assert_eq!(canonical_digest(&g), key);
            assert_eq!(b.distance(&g.inverse()), Some(dist), "inverse distance");
            // Triangle inequality sample: d(g * s) <= d(g) + 1 and the
            // fineness bound from the canonical form.
            assert!(crate::gridform::length_lower_bound(&g) <= dist);
            checked += 1;
            if checked >= 400 {
                break;
            }
        }
        let x0 = t.resolve("x0").unwrap();
        let g = x0.compose(&x0);
        let d = b.distance(&g).unwrap();
        assert!(d <= 2);
        let w = geodesic_in(&b, &g).unwrap();
        assert_eq!(w.len() as u32, d);
        assert!(word_to_element(&w, &t).unwrap().same_map(&g));
    }

    #[test]
    fn shallow_pairs_respect_distance() {
        let t = table();
        let b = ball(2, &t).unwrap();
        let mut checked = 0;
        for (key, dist) in b.entries() {
            if dist == 0 {
                continue;
            }
            let w = b.witness_for_key(key).unwrap();
            let g = word_to_element(&w, &t).unwrap();
            // The grid range pattern is representable, so its fineness
            // already bounds the minimal target depth; search only when
            // that cheap bound is not conclusive.
            let grid_bound = crate::gridform::element_fineness(&g);
            if grid_bound > 4 * dist {
                let mp = treealg::minimal_pair(&g, 4 * dist).unwrap();
                assert!(
                    mp.target.depth() <= 4 * dist,
                    "target depth {} vs distance {dist}",
                    mp.target.depth()
                );
            }
            checked += 1;
            if checked >= 150 {
                break;
            }
        }
    }

    #[test]
    fn certificates() {
        let t = table();
        let b = ball(1, &t).unwrap();
        let c = certify(&b, &Element::identity(), None);
        assert_eq!(c, LengthCertificate { lower: 0, upper: Some(0), exact: true });
        let x0 = t.resolve("x0").unwrap();
        let c = certify(&b, &x0, None);
        assert_eq!(c, LengthCertificate { lower: 1, upper: Some(1), exact: true });
        // Outside the ball: lower from exhaustion, upper from a witness.
        let w = GroupWord::parse("x0 B1 C0 y1 x0 B0").unwrap();
        let g = word_to_element(&w, &t).unwrap();
        let c = certify(&b, &g, Some(&w));
        assert!(!c.exact);
        assert!(c.lower >= 2);
        assert_eq!(c.upper, Some(6));
        let c = exact_length(&x0, &t, 1).unwrap();
        assert!(c.exact && c.lower == 1);
    }

    #[test]
    fn geodesics_and_errors() {
        let t = table();
        let b = ball(1, &t).unwrap();
        let w = geodesic_in(&b, &Element::identity()).unwrap();
        assert!(w.is_empty());
        let far = word_to_element(&GroupWord::parse("x0 y0 B1 C1").unwrap(), &t).unwrap();
        assert!(matches!(geodesic_in(&b, &far), Err(MetricError::NotWithinRadius(1))));
        assert!(matches!(
            ball_with_cap(2, &t, 10),
            Err(MetricError::ResourceBudgetExceeded(_))
        ));
        // Inverse consistency: the reversed-inverted witness evaluates to
        // the inverse and has geodesic length.
        let x0 = t.resolve("x0").unwrap();
        let g = x0.compose(&t.resolve("C0").unwrap());
        let b2 = ball(2, &t).unwrap();
        let w = geodesic_in(&b2, &g).unwrap();
        let wi = w.inverse();
        assert!(word_to_element(&wi, &t).unwrap().same_map(&g.inverse()));
        assert_eq!(b2.distance(&g.inverse()), Some(wi.len() as u32));
    }
}
