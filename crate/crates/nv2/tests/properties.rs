//! Property suite: algebraic laws, canonical-form soundness, round-trips,
//! and the mirror/family dictionaries, all on randomized inputs.

mod common;

use common::{elem, elem_of, pointwise_equal, table};
use nv2::divergence::{mirror_letter, mirror_word};
use nv2::element::Element;
use nv2::genset::{self, FamilyBase, GroupWord};
use nv2::gridform;
use proptest::prelude::*;

/// Strategy: a word of length `0..=max_len` as (symbol index, sign) pairs.
fn word_strategy(max_len: usize) -> impl Strategy<Value = GroupWord> {
    let n = table().symbols().len();
    proptest::collection::vec((0..n, any::<bool>()), 0..=max_len).prop_map(|ls| {
        let syms = table().symbols();
        let mut w = GroupWord::empty();
        for (i, pos) in ls {
            w.push(&syms[i], if pos { 1 } else { -1 });
        }
        w
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn word_evaluation_is_a_homomorphism(u in word_strategy(5), v in word_strategy(5)) {
        let joined = elem_of(&u.concat(&v));
        let split = elem_of(&u).compose(&elem_of(&v));
        prop_assert!(joined.same_map(&split));
    }

    #[test]
    fn composition_is_associative(u in word_strategy(4), v in word_strategy(4), w in word_strategy(4)) {
        let (f, g, h) = (elem_of(&u), elem_of(&v), elem_of(&w));
        let left = f.compose(&g).compose(&h);
        let right = f.compose(&g.compose(&h));
        prop_assert!(left.same_map(&right));
        prop_assert!(gridform::equals(&left, &right));
    }

    #[test]
    fn inverses_cancel(u in word_strategy(6)) {
        let g = elem_of(&u);
        prop_assert!(g.compose(&g.inverse()).reduce_pair().is_identity());
        prop_assert!(g.inverse().compose(&g).reduce_pair().is_identity());
        prop_assert!(g.inverse().inverse().same_map(&g));
        prop_assert!(gridform::equals(&g.compose(&g.inverse()), &Element::identity()));
    }

    #[test]
    fn equality_matches_the_pointwise_oracle(u in word_strategy(6), v in word_strategy(6), pad in 0usize..3) {
        let f = elem_of(&u);
        // Half the cases compare against a differently-built equal element.
        let g = if pad > 0 {
            let mut w = u.prefix(pad.min(u.len()));
            let mid = GroupWord::parse("x1 x1^-1").unwrap();
            w = w.concat(&mid);
            for (sym, sign) in &u.letters()[pad.min(u.len())..] {
                w.push(sym, *sign);
            }
            elem_of(&w)
        } else {
            elem_of(&v)
        };
        let (agree, _) = pointwise_equal(&f, &g, 24);
        prop_assert_eq!(gridform::equals(&f, &g), agree);
    }

    #[test]
    fn normal_form_is_canonical_and_faithful(u in word_strategy(6)) {
        let g = elem_of(&u);
        let nf = gridform::normal_form(&g);
        prop_assert!(nf.is_reduced());
        let back = nf.to_element();
        prop_assert!(back.same_map(&g));
        // Canonical: the normal form of the round-trip is bit-identical.
        let again = gridform::normal_form(&back);
        prop_assert_eq!(nf.to_text(), again.to_text());
        prop_assert_eq!(gridform::canonical_key(&g), gridform::canonical_key(&back));
    }

    #[test]
    fn element_text_round_trips(u in word_strategy(6)) {
        let g = elem_of(&u);
        let back = Element::parse(&g.to_text()).unwrap();
        prop_assert!(back.same_map(&g));
    }

    #[test]
    fn word_text_round_trips(u in word_strategy(8)) {
        let back = GroupWord::parse(&u.to_string()).unwrap();
        prop_assert_eq!(back.letters(), u.letters());
    }

    #[test]
    fn length_lower_bound_is_sound(u in word_strategy(8)) {
        let g = elem_of(&u);
        prop_assert!(gridform::length_lower_bound(&g) as usize <= u.len());
        prop_assert!(gridform::element_fineness(&g).div_ceil(8) as usize <= u.len());
    }

    #[test]
    fn evaluation_respects_refinement(u in word_strategy(5), bits in proptest::collection::vec(any::<bool>(), 0..6)) {
        let g = elem_of(&u);
        let (d, _) = &g.pairs()[0];
        let mut u1 = d.w1.clone();
        let mut u2 = d.w2.clone();
        for (i, b) in bits.iter().enumerate() {
            if i % 2 == 0 {
                u1.push(u8::from(*b));
            } else {
                u2.push(u8::from(*b));
            }
        }
        let (v1, v2) = g.evaluate(&u1, &u2).unwrap();
        let (c1, c2) = g.evaluate(&d.w1, &d.w2).unwrap();
        // Deeper prefixes extend the image of the containing rectangle.
        prop_assert!(c1.is_prefix_of(&v1));
        prop_assert!(c2.is_prefix_of(&v2));
        let s1 = u1.strip_prefix(&d.w1).unwrap();
        let s2 = u2.strip_prefix(&d.w2).unwrap();
        prop_assert_eq!(v1, c1.concat(&s1));
        prop_assert_eq!(v2, c2.concat(&s2));
    }

    #[test]
    fn mirrored_words_evaluate_to_mirrored_elements(u in word_strategy(5)) {
        if let Some(m) = mirror_word(&u) {
            let direct = elem_of(&u).mirror();
            let translated = elem_of(&m);
            prop_assert!(direct.same_map(&translated));
        }
    }
}

#[test]
fn mirror_dictionary_is_exact_per_letter() {
    let t = table();
    let mut mirrored = 0;
    for sym in t.symbols() {
        for sign in [1i8, -1] {
            let Some((msym, msign)) = mirror_letter(sym, sign) else { continue };
            mirrored += 1;
            let mut e = t.resolve(sym).unwrap();
            if sign < 0 {
                e = e.inverse();
            }
            let mut m = t.resolve(msym).unwrap();
            if msign < 0 {
                m = m.inverse();
            }
            assert!(e.mirror().same_map(&m), "mirror of {sym}^{sign} is not {msym}^{msign}");
        }
    }
    assert!(mirrored >= 20, "the mirror dictionary covers the working alphabet");
    // The quarter-turn swaps the two shear families and flips the sign of
    // the rotation letter.
    let c0 = elem("C0");
    assert!(c0.mirror().same_map(&c0.inverse()));
}

#[test]
fn families_are_conjugates() {
    let t = table();
    let x0 = elem("x0");
    for base in [FamilyBase::A, FamilyBase::B, FamilyBase::C] {
        let mut prev = genset::family(base, 1, t).unwrap();
        for i in 2..=5 {
            let cur = genset::family(base, i, t).unwrap();
            let conj = x0.inverse().compose(&prev).compose(&x0).reduce_pair();
            assert!(cur.same_map(&conj), "{base:?} family step {i}");
            prev = cur;
        }
    }
    assert!(genset::family(FamilyBase::C, 0, t).is_err(), "families are indexed from 1");
    // Direct table entries agree with the family law.
    assert!(genset::family(FamilyBase::A, 1, t).unwrap().same_map(&elem("x1")));
    assert!(genset::family(FamilyBase::B, 1, t).unwrap().same_map(&elem("B1")));
    assert!(genset::family(FamilyBase::C, 1, t).unwrap().same_map(&elem("C1")));
}

#[test]
fn resolved_family_symbols_match_the_law() {
    let t = table();
    for (sym, base, i) in [
        ("A3", FamilyBase::A, 3),
        ("B4", FamilyBase::B, 4),
        ("C2", FamilyBase::C, 2),
        ("C5", FamilyBase::C, 5),
    ] {
        let by_symbol = t.resolve(sym).unwrap();
        let by_law = genset::family(base, i, t).unwrap();
        assert!(by_symbol.same_map(&by_law), "{sym}");
    }
}
