mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reslin::gadgets::{lift_eval_total, Gadget};
use reslin::gf2blocks::*;

fn blockset(mask: u64) -> BTreeSet<usize> {
    (0..64).filter(|j| (mask >> j) & 1 == 1).collect()
}

fn random_instance(rng: &mut ChaCha8Rng) -> (GF2Matrix, BlockStructure) {
    let m = rng.gen_range(1..=6);
    let b = rng.gen_range(1..=3);
    let s = BlockStructure::new(m, b);
    let rows = rng.gen_range(0..=m);
    let u = if rng.gen_bool(0.5) {
        random_clustered(rng, rows, s)
    } else {
        random_matrix(rng, rows, s, 0.3)
    };
    (u, s)
}

#[test]
fn spread_matches_subspace_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let (u, s) = random_instance(&mut rng);
        assert_eq!(is_spread(&u, s), spread_oracle(&masks(&u), s), "{u:?} {s:?}");
    }
}

#[test]
fn closure_is_the_unique_minimal_obstruction() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..500 {
        let (u, s) = random_instance(&mut rng);
        let minimal = minimal_obstructions(&masks(&u), s);
        assert_eq!(minimal.len(), 1, "{u:?}");
        let a = AffineSpace::new(u.clone(), GF2Vector::zeros(u.nrows()), s).unwrap();
        let cl = closure(&a).unwrap().blockset;
        assert_eq!(cl, blockset(minimal[0]));
        assert!(cl.len() <= u.rank());
    }
}

#[test]
fn closure_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..300 {
        let (u, s) = random_instance(&mut rng);
        let x = GF2Vector::from_ones(s.len(), (0..s.len()).filter(|_| rng.gen_bool(0.5)));
        let rhs = u.mul_vec(&x);
        let big = AffineSpace::new(u.clone(), rhs, s).unwrap();
        let k = rng.gen_range(1..=2);
        let extra = random_clustered(&mut rng, k, s);
        let mut small = big.clone();
        for r in extra.rows() {
            small = small.with_equation(r, r.dot(&x));
        }
        let (cb, cs) = (closure(&big).unwrap().blockset, closure(&small).unwrap().blockset);
        assert!(cb.is_subset(&cs), "{cb:?} {cs:?}");
    }
}

#[test]
fn safe_basis_matches_smallest_tuple() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut spread_seen = 0;
    for _ in 0..500 {
        let (u, s) = random_instance(&mut rng);
        let oracle = smallest_safe_tuple(&masks(&u), s);
        match safe_basis(&u, s) {
            Ok(sb) => {
                spread_seen += 1;
                assert_eq!(Some(sb.pivots.clone()), oracle);
                for (r, w) in sb.vectors.iter().enumerate() {
                    for (c, &p) in sb.pivots.iter().enumerate() {
                        assert_eq!(w.get(p), r == c);
                    }
                }
                let blocks: BTreeSet<usize> = sb.pivots.iter().map(|&p| s.block_of(p)).collect();
                assert_eq!(blocks.len(), sb.pivots.len());
                let mut both = u.rows().to_vec();
                both.extend(sb.vectors.iter().cloned());
                let joint = GF2Matrix::from_rows(both, s.len()).unwrap();
                assert_eq!(joint.rank(), u.rank());
                assert_eq!(sb.vectors.len(), u.rank());
            }
            Err(Gf2Error::NotSpread { .. }) => {
                assert!(!spread_oracle(&masks(&u), s));
                assert!(oracle.is_none());
            }
            Err(e) => panic!("{e}"),
        }
    }
    assert!(spread_seen > 100);
}

#[test]
fn restriction_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..200 {
        let (u, s) = random_instance(&mut rng);
        let t: u64 = rng.gen_range(0..1u64 << s.m);
        let r = restrict_to_blocks(&u, &blockset(t), s).unwrap();
        let outside: u64 = (0..s.m)
            .filter(|j| (t >> j) & 1 == 0)
            .fold(0, |acc, j| acc | (((1u64 << s.b) - 1) << (j * s.b)));
        let mut expect: Vec<u64> = span(&masks(&u)).into_iter().filter(|v| v & outside == 0).collect();
        let mut got = span(&masks(&r));
        expect.sort();
        got.sort();
        assert_eq!(expect, got);
    }
}

#[test]
fn stifling_extension_against_exhaustive_search() {
    let g = Gadget::ip(4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..100 {
        let m = rng.gen_range(1..=4);
        let s = BlockStructure::new(m, 4);
        let k = rng.gen_range(0..=m + 1);
        let u = random_clustered(&mut rng, k, s);
        let beta = GF2Vector::from_ones(s.len(), (0..s.len()).filter(|_| rng.gen_bool(0.5)));
        let a = AffineSpace::new(u.clone(), u.mul_vec(&beta), s).unwrap();
        let cl = closure(&a).unwrap().blockset;
        let alpha: Vec<bool> = (0..m)
            .map(|j| if cl.contains(&j) { g.eval(s.block_value(&beta, j)) } else { rng.gen_bool(0.5) })
            .collect();
        let gamma = stifling_extension(&a, &beta, &alpha, &g).unwrap();
        assert!(a.contains(&gamma));
        assert_eq!(lift_eval_total(&g, &gamma), alpha);
        for &j in &cl {
            assert_eq!(s.block_value(&gamma, j), s.block_value(&beta, j));
        }
        // exhaustive confirmation that a preimage exists at all
        assert!(a.points().iter().any(|p| lift_eval_total(&g, p) == alpha));
    }
}

#[test]
fn stifling_extension_errors() {
    let s = BlockStructure::new(2, 4);
    let g = Gadget::ip(4).unwrap();
    let a = AffineSpace::from_equations(s, [(&GF2Vector::unit(8, 0), true)]).unwrap();
    let outside = GF2Vector::zeros(8);
    assert_eq!(
        stifling_extension(&a, &outside, &[true, true], &g),
        Err(Gf2Error::NotInSpace)
    );
    let xor = Gadget::xor(4).unwrap();
    let beta = GF2Vector::unit(8, 0);
    assert_eq!(stifling_extension(&a, &beta, &[true, true], &xor), Err(Gf2Error::NotStifled));
    // block 0 fully fixed: closure is {0}
    let units: Vec<GF2Vector> = (0..4).map(|i| GF2Vector::unit(8, i)).collect();
    let fixed = AffineSpace::from_equations(s, units.iter().enumerate().map(|(i, v)| (v, i == 0))).unwrap();
    assert_eq!(closure(&fixed).unwrap().blockset, BTreeSet::from([0]));
    assert_eq!(
        stifling_extension(&fixed, &beta, &[true, false], &g),
        Err(Gf2Error::AlphaConflict { block: 0 })
    );
    let full = AffineSpace::full(s);
    let gamma = stifling_extension(&full, &outside, &[true, false], &g).unwrap();
    assert_eq!(lift_eval_total(&g, &gamma), vec![true, false]);
}

proptest! {
    #[test]
    fn dimension_splits_over_blocks(seed in any::<u64>(), tmask in 0u64..64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (u, s) = random_instance(&mut rng);
        let t = blockset(tmask & ((1 << s.m) - 1));
        let inside = restrict_to_blocks(&u, &t, s).unwrap();
        let (proj, rs) = project_away(&u, &t, s).unwrap();
        prop_assert_eq!(rs.m, s.m - t.len());
        prop_assert_eq!(u.rank(), inside.rank() + proj.rank());
    }

    #[test]
    fn rank_invariant_under_row_operations(seed in any::<u64>(), i in 0usize..6, j in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = BlockStructure::new(4, 3);
        let u = random_matrix(&mut rng, 6, s, 0.4);
        let mut rows = u.rows().to_vec();
        if i != j {
            let add = rows[j].clone();
            rows[i].xor_assign(&add);
        }
        rows.swap(0, i);
        let v = GF2Matrix::from_rows(rows, s.len()).unwrap();
        prop_assert_eq!(u.rank(), v.rank());
        prop_assert_eq!(u.rank(), u.rref().0.rank());
    }
}
