mod common;

use deconflict::argumentation::{
    classify_explanations, ArgumentId, ArgumentSet, ArgumentationError, ArgumentationFramework,
};
use proptest::prelude::*;

use common::{brute_labels, BruteAf};

fn framework(max: usize) -> impl Strategy<Value = ArgumentationFramework> {
    (1..=max).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * n).prop_map(move |bits| {
            let attacks = (0..n * n)
                .filter(|&k| bits[k] && (k % 3 != 0))
                .map(|k| (ArgumentId((k / n) as u32), ArgumentId((k % n) as u32)));
            ArgumentationFramework::unlabelled(n, attacks).unwrap()
        })
    })
}

fn id(i: usize) -> ArgumentId {
    ArgumentId(i as u32)
}

proptest! {
    #[test]
    fn semantics_match_brute_force(af in framework(8), s in any::<u64>()) {
        let b = BruteAf::new(&af);
        let s = s & af.all().bits();
        let t = s.rotate_left(3) & af.all().bits();
        prop_assert_eq!(af.attacks_set(ArgumentSet::from_bits(s), ArgumentSet::from_bits(t)).unwrap(), b.attacks_set(s, t));
        prop_assert_eq!(af.is_conflict_free(ArgumentSet::from_bits(s)).unwrap(), b.conflict_free(s));
        prop_assert_eq!(af.is_admissible(ArgumentSet::from_bits(s)).unwrap(), b.admissible(s));
        for a in 0..af.len() {
            prop_assert_eq!(af.is_acceptable(id(a), ArgumentSet::from_bits(s)).unwrap(), b.acceptable(a, s));
        }
    }

    #[test]
    fn r_defence_is_reflexive_and_transitive(af in framework(8)) {
        let n = af.len();
        let r = |x: usize, y: usize| af.r_defends(id(x), id(y)).unwrap();
        for x in 0..n {
            prop_assert!(r(x, x));
            for y in 0..n {
                for z in 0..n {
                    if r(x, y) && r(y, z) {
                        prop_assert!(r(x, z), "{x} -> {y} -> {z}");
                    }
                }
            }
        }
        let oracle = BruteAf::new(&af).r_defence();
        for (x, row) in oracle.iter().enumerate() {
            for (y, &want) in row.iter().enumerate() {
                prop_assert_eq!(r(x, y), want);
            }
        }
    }

    #[test]
    fn explanations_contain_topic_and_are_admissible(af in framework(6), cap in 1usize..7) {
        let b = BruteAf::new(&af);
        for a in 0..af.len() {
            let found = af.explanations_of(id(a), cap).unwrap();
            let bits: Vec<u64> = found.iter().map(|s| s.bits()).collect();
            prop_assert_eq!(&bits, &b.explanations(a, cap));
            for s in &found {
                prop_assert!(s.contains(id(a)));
                prop_assert!(af.is_admissible(*s).unwrap());
                prop_assert!(af.set_r_defends(*s, id(a)).unwrap());
                prop_assert!(s.len() <= cap);
            }
            let labels = classify_explanations(&found);
            let want = brute_labels(&bits);
            for ((set, l), w) in labels.iter().zip(&want) {
                prop_assert_eq!((l.minimal, l.maximal, l.compact, l.verbose), *w);
                if l.compact {
                    prop_assert!(!found.iter().any(|o| o.is_strict_subset(*set)));
                }
            }
        }
    }

    #[test]
    fn empty_set_and_unattacked_singletons_are_admissible(af in framework(8)) {
        prop_assert!(af.is_admissible(ArgumentSet::EMPTY).unwrap());
        for a in af.arguments() {
            if af.attackers_of(a).is_empty() {
                prop_assert!(af.is_admissible(ArgumentSet::singleton(a)).unwrap());
                prop_assert!(af.explanations_of(a, 1).unwrap().contains(&ArgumentSet::singleton(a)));
            }
        }
    }
}

#[test]
fn unknown_arguments_are_rejected() {
    let af = ArgumentationFramework::unlabelled(3, [(id(0), id(1))]).unwrap();
    assert!(matches!(af.r_defends(id(0), id(5)), Err(ArgumentationError::UnknownArgument(_))));
    assert!(af.is_admissible(ArgumentSet::singleton(id(9))).is_err());
    assert!(ArgumentationFramework::unlabelled(2, [(id(0), id(2))]).is_err());
}

#[test]
fn classification_of_a_nested_pair() {
    let b = ArgumentSet::singleton(id(1));
    let bc = b.with(id(2));
    let labels = classify_explanations(&[b, bc]);
    assert!(labels[0].1.minimal && labels[0].1.compact && !labels[0].1.maximal && !labels[0].1.verbose);
    assert!(labels[1].1.maximal && labels[1].1.verbose && !labels[1].1.minimal && !labels[1].1.compact);
    assert!(classify_explanations(&[]).is_empty());
}
