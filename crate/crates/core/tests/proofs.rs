mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reslin::formulas::*;
use reslin::gadgets::Gadget;
use reslin::proofs::*;

fn stone(n: usize, seed: u64) -> (Dag, ObfuscationMap, CnfFormula) {
    let g = pyramid(n).unwrap();
    let rho = random_obfuscation(g.len(), seed);
    let f = stone_formula(&g, &rho).unwrap();
    (g, rho, f)
}

#[test]
fn stone_refutations_accepted_for_many_seeds() {
    for n in 2..=4 {
        let mut widths = Vec::new();
        for seed in 0..50 {
            let (g, rho, f) = stone(n, seed);
            let p = refute_stone(&g, &rho).unwrap();
            let s = check_proof(&f, &p, Mode::Resolution).unwrap();
            assert!(s.refutation, "n={n} seed={seed}");
            assert_eq!(s.length, p.len());
            widths.push(s.width);
        }
        assert!(widths.iter().all(|&w| w <= 7), "n={n}: {widths:?}");
    }
}

#[test]
fn stone_length_does_not_depend_on_rho() {
    let lengths: Vec<usize> = (0..10)
        .map(|seed| {
            let (g, rho, _) = stone(3, seed);
            refute_stone(&g, &rho).unwrap().len()
        })
        .collect();
    assert!(lengths.windows(2).all(|w| w[0] == w[1]), "{lengths:?}");
}

#[test]
fn stone_refutation_is_not_regular_but_fragments_are() {
    let (g, rho, f) = stone(2, 0);
    let s = check_proof(&f, &refute_stone(&g, &rho).unwrap(), Mode::Resolution).unwrap();
    assert_eq!(s.regular, Some(false));
    let premises = vec![vec![1, 2], vec![1, -2], vec![-1, 3], vec![-1, -3]];
    let p = derive_semantic(&premises, &[]).unwrap();
    let f = CnfFormula::new(3, premises).unwrap();
    let s = check_proof(&f, &p, Mode::Resolution).unwrap();
    assert!(s.refutation);
    assert_eq!(s.regular, Some(true));
    assert!(check_proof(&f, &p, Mode::TreeLike).is_ok());
}

#[test]
fn mutations_are_rejected_at_or_after_the_mutated_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (g, rho, f) = stone(3, 4);
    let p = refute_stone(&g, &rho).unwrap();
    for _ in 0..100 {
        let (q, i) = mutate(&p, &mut rng).unwrap();
        for mode in [Mode::Resolution, Mode::ResLin] {
            let e = check_proof(&f, &q, mode).expect_err("mutant accepted");
            assert!(e.step() >= i, "{e} reported before step {}", i + 1);
        }
    }
}

#[test]
fn weakening_mutations_are_rejected() {
    // (x1) weakened to (x1 ∨ x2 = 0) and cut against (¬x1), (x2 = 1)
    let f = CnfFormula::new(2, vec![vec![1], vec![-1], vec![2]]).unwrap();
    let p = ProofTrace {
        nvars: 2,
        steps: vec![
            ProofStep::Axiom(0),
            ProofStep::Weaken {
                premise: 0,
                clause: "1=1;1+2=0".parse().unwrap(),
            },
            ProofStep::Axiom(1),
            ProofStep::Resolve {
                left: 2,
                right: 1,
                pivot: LinearForm::var(1),
            },
            ProofStep::Axiom(2),
        ],
    };
    let s = check_proof(&f, &p, Mode::ResLin).unwrap();
    assert!(!s.refutation);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut weakening_seen = false;
    for _ in 0..50 {
        let (q, i) = mutate(&p, &mut rng).unwrap();
        if i == 1 {
            weakening_seen = true;
            // flipping x1 drops the premise's only equation; flipping the
            // other one still contains the premise
            let ProofStep::Weaken { clause, .. } = &q.steps[1] else { unreachable!() };
            let implied = clause.contains(&[1], true);
            assert_eq!(check_proof(&f, &q, Mode::ResLin).is_ok(), implied);
        }
    }
    assert!(weakening_seen);
}

#[test]
fn checker_rejects_malformed_traces() {
    let empty = CnfFormula::new(1, vec![]).unwrap();
    let p = ProofTrace {
        nvars: 1,
        steps: vec![ProofStep::Axiom(0)],
    };
    assert!(matches!(check_proof(&empty, &p, Mode::Resolution), Err(CheckError::AxiomMismatch { step: 0, .. })));

    let f = CnfFormula::new(1, vec![vec![1], vec![-1]]).unwrap();
    let forward = ProofTrace {
        nvars: 1,
        steps: vec![ProofStep::Resolve {
            left: 0,
            right: 1,
            pivot: LinearForm::var(1),
        }],
    };
    assert!(matches!(check_proof(&f, &forward, Mode::Resolution), Err(CheckError::BadReference { .. })));

    let swapped = ProofTrace {
        nvars: 1,
        steps: vec![
            ProofStep::Axiom(0),
            ProofStep::Axiom(1),
            ProofStep::Resolve {
                left: 0,
                right: 1,
                pivot: LinearForm::var(1),
            },
        ],
    };
    let e = check_proof(&f, &swapped, Mode::Resolution).unwrap_err();
    assert_eq!(e.step(), 2);
    assert!(e.to_string().starts_with("step 3:"), "{e}");
}

#[test]
fn tree_like_mode_rejects_reuse() {
    let f = CnfFormula::new(2, vec![vec![1, 2], vec![-1, 2], vec![-2]]).unwrap();
    let mut p = ProofTrace::new(2);
    p.push(ProofStep::Axiom(1));
    p.push(ProofStep::Axiom(0));
    let x2 = p.push(ProofStep::Resolve {
        left: 0,
        right: 1,
        pivot: LinearForm::var(1),
    });
    p.push(ProofStep::Axiom(2));
    p.push(ProofStep::Resolve {
        left: 3,
        right: x2,
        pivot: LinearForm::var(2),
    });
    assert!(check_proof(&f, &p, Mode::TreeLike).unwrap().refutation);
    p.push(ProofStep::Resolve {
        left: 3,
        right: x2,
        pivot: LinearForm::var(2),
    });
    let e = check_proof(&f, &p, Mode::TreeLike).unwrap_err();
    assert!(matches!(e, CheckError::ModeViolation { step: 5, .. }), "{e}");
    assert!(check_proof(&f, &p, Mode::Resolution).is_ok());
}

#[test]
fn rlin_round_trip_of_a_stone_refutation() {
    let (g, rho, f) = stone(3, 9);
    let p = refute_stone(&g, &rho).unwrap();
    let text = p.to_rlin();
    assert!(text.starts_with(&format!("p rlin {} {}\n", f.nvars, p.len())));
    let q = ProofTrace::parse_rlin(text.as_bytes()).unwrap();
    assert_eq!(p, q);
    assert_eq!(q.to_rlin(), text);
    assert!(check_proof(&f, &q, Mode::Resolution).unwrap().refutation);
}

#[test]
fn lifted_refutations_accepted() {
    for (n, name) in [(2, "xor2"), (3, "xor2"), (2, "and2")] {
        let (g, rho, f) = stone(n, 3);
        let p = refute_stone(&g, &rho).unwrap();
        let gadget = Gadget::named(name).unwrap();
        let lifted = LiftedFormula::new(&f, &gadget).unwrap();
        let mut c = Checker::new(&lifted, Mode::Resolution);
        let st = refute_lifted_into(&f, &p, &gadget, &mut c).unwrap();
        let s = c.stats();
        assert!(s.refutation, "{name} n={n}");
        assert_eq!(s.length, st.length);
        assert_eq!(st.base_length, p.len());
        assert!(s.width <= 8 * gadget.arity());
        let kappa = (st.length as f64 / st.base_length as f64).log2() / gadget.arity() as f64;
        assert!(kappa <= 4.5, "{name} n={n}: {kappa}");
    }
}

#[test]
fn materialized_and_implicit_lifts_agree() {
    let (g, rho, f) = stone(2, 5);
    let p = refute_stone(&g, &rho).unwrap();
    let gadget = Gadget::xor(2).unwrap();
    let trace = refute_lifted(&f, &p, &gadget).unwrap();
    let implicit = LiftedFormula::new(&f, &gadget).unwrap();
    let explicit = lift_formula(&f, &gadget).unwrap();
    let a = check_proof(&implicit, &trace, Mode::Resolution).unwrap();
    let b = check_proof(&explicit, &trace, Mode::Resolution).unwrap();
    assert_eq!(a, b);
    assert!(a.refutation);
}

#[test]
fn lifting_rejects_bad_inputs() {
    let (g, rho, f) = stone(2, 0);
    let mut p = refute_stone(&g, &rho).unwrap();
    let gadget = Gadget::xor(2).unwrap();
    let wide = Gadget::xor(9).unwrap();
    assert!(matches!(refute_lifted(&f, &p, &wide), Err(ProofError::WidthCap { arity: 9, .. })));
    p.steps.truncate(p.len() - 1);
    assert!(matches!(refute_lifted(&f, &p, &gadget), Err(ProofError::NotARefutation)));
    p.steps[0] = ProofStep::Resolve {
        left: 1,
        right: 2,
        pivot: LinearForm::var(1),
    };
    assert!(matches!(refute_lifted(&f, &p, &gadget), Err(ProofError::BaseRejected(_))));
}

fn truth_implies(premises: &[Clause], target: &[i32], nvars: usize) -> bool {
    (0u64..1 << nvars).all(|x| {
        let bits: Vec<bool> = (0..nvars).map(|i| (x >> i) & 1 == 1).collect();
        let sat = |c: &[i32]| !clause_falsified(c, &bits);
        !premises.iter().all(|c| sat(c)) || sat(target)
    })
}

fn random_clause<R: Rng>(rng: &mut R, nvars: u32, max: usize) -> Clause {
    let k = rng.gen_range(0..=max);
    let mut vars: Vec<u32> = (0..k).map(|_| rng.gen_range(1..=nvars)).collect();
    vars.sort_unstable();
    vars.dedup();
    vars.into_iter().map(|v| if rng.gen_bool(0.5) { v as i32 } else { -(v as i32) }).collect()
}

#[test]
fn derive_semantic_on_random_four_variable_implications() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut implied, mut refused) = (0, 0);
    for _ in 0..2000 {
        let np = rng.gen_range(1..=7);
        let premises: Vec<Clause> = (0..np).map(|_| random_clause(&mut rng, 4, 3)).filter(|c| !c.is_empty()).collect();
        let target = random_clause(&mut rng, 4, 3);
        let truth = truth_implies(&premises, &target, 4);
        match derive_semantic(&premises, &target) {
            Ok(p) => {
                assert!(truth);
                implied += 1;
                let f = CnfFormula::new(4, premises.clone()).unwrap();
                let (s, clauses) = derive_clauses(&f, &p, Mode::TreeLike).unwrap();
                assert!(clauses.last().unwrap().is_subclause_of(&LinearClause::from_literals(&target)));
                let fragment = derive_fragment(&premises, &target).unwrap();
                assert!(fragment.resolutions() < 1 << 4);
                assert_eq!(s.length, fragment.steps.len());
            }
            Err(e) => {
                assert_eq!(e, SemanticError::NotImplied);
                assert!(!truth);
                refused += 1;
            }
        }
    }
    assert!(implied > 100 && refused > 100, "{implied} {refused}");
}

#[test]
fn entails_on_small_examples() {
    let c = |s: &str| s.parse::<LinearClause>().unwrap();
    assert!(entails(&c("1=1"), &c("1=1;2=0")));
    assert!(!entails(&c("1=1"), &c("2=1")));
    assert!(entails(&c("2=0"), &c("1+2=0;1+2=1")));
    assert!(entails(&LinearClause::empty(), &c("3=1")));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn entails_matches_truth_tables(seed in any::<u64>(), nvars in 1u32..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_linear_clause(&mut rng, nvars, 4);
        let b = if rng.gen_bool(0.3) {
            // a superset of a is always entailed
            let extra = random_linear_clause(&mut rng, nvars, 2);
            let eqs = a.equations().chain(extra.equations())
                .map(|e| (LinearForm::new(e.form.iter().copied()).unwrap(), e.rhs))
                .collect::<Vec<_>>();
            LinearClause::from_equations(eqs)
        } else {
            random_linear_clause(&mut rng, nvars, 4)
        };
        prop_assert_eq!(entails(&a, &b), entails_oracle(&a, &b, nvars as usize));
    }

    #[test]
    fn resolution_matches_semantics(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nvars = 6;
        let form = LinearForm::new((1..=nvars).filter(|_| rng.gen_bool(0.4))).unwrap_or(LinearForm::var(1));
        let with = |c: LinearClause, bit: bool| {
            let eqs = c.equations()
                .map(|e| (LinearForm::new(e.form.iter().copied()).unwrap(), e.rhs))
                .chain([(form.clone(), bit)])
                .collect::<Vec<_>>();
            LinearClause::from_equations(eqs)
        };
        let l = with(random_linear_clause(&mut rng, nvars, 3), false);
        let r = with(random_linear_clause(&mut rng, nvars, 3), true);
        let out = LinearClause::resolve(&l, &r, form.vars()).unwrap();
        // sound: every assignment satisfying both premises satisfies the resolvent
        for x in 0u64..1 << nvars {
            let bits: Vec<bool> = (0..nvars).map(|i| (x >> i) & 1 == 1).collect();
            if l.eval(&bits) && r.eval(&bits) {
                prop_assert!(out.eval(&bits));
            }
        }
    }

    #[test]
    fn rlin_clause_text_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_linear_clause(&mut rng, 30, 5);
        let text = c.to_string();
        prop_assert_eq!(text.parse::<LinearClause>().unwrap(), c);
    }
}
