//! Property tests over the arithmetic, parsing and reporting invariants.

mod common;

use camo::bench::parse_verdict;
use camo::interp::{gen_vectors, ArgValue};
use camo::ir::{ConstInt, FuncSig, IrType};
use camo::metrics::{compute, ConfusionMatrix};
use camo::obf::{split_blocks, ObfConfig};
use camo::rng::SplitMix64;
use proptest::prelude::*;

proptest! {
    /// accuracy == (recall * positives + specificity * negatives) / total
    /// whenever both class totals are nonzero.
    #[test]
    fn accuracy_decomposes_over_classes(
        tp in 0u64..500, fp in 0u64..500, fn_ in 0u64..500, tn in 0u64..500,
    ) {
        prop_assume!(tp + fn_ > 0 && tn + fp > 0);
        let cm = ConfusionMatrix::new(tp, fp, fn_, tn);
        let m = compute(&cm);
        let recall = m.recall.unwrap();
        let specificity = m.specificity.unwrap();
        prop_assert!((0.0..=1.0).contains(&recall));
        prop_assert!((0.0..=1.0).contains(&specificity));
        let recombined =
            (recall * (tp + fn_) as f64 + specificity * (tn + fp) as f64) / cm.total() as f64;
        prop_assert!((m.accuracy.unwrap() - recombined).abs() < 1e-12);
    }

    /// The verdict parser is total and stable on arbitrary input.
    #[test]
    fn verdict_parser_never_panics(s in ".{0,400}") {
        let a = parse_verdict(&s);
        let b = parse_verdict(&s);
        prop_assert_eq!(a, b);
    }

    /// Vector generation is deterministic and respects parameter widths.
    #[test]
    fn vectors_deterministic_and_in_range(
        n in 0usize..96,
        seed in any::<u64>(),
        widths in proptest::collection::vec(prop_oneof![Just(1u32), Just(8), Just(16), Just(32), Just(64)], 0..4),
    ) {
        let sig = FuncSig {
            ret: IrType::Void,
            params: widths.iter().map(|w| IrType::Int(*w)).collect(),
            variadic: false,
        };
        let a = gen_vectors(&sig, n, seed).unwrap();
        let b = gen_vectors(&sig, n, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.len(), n);
        for vector in &a {
            for (arg, w) in vector.iter().zip(&widths) {
                match arg {
                    ArgValue::Int(c) => {
                        prop_assert_eq!(c.width(), *w);
                        // Stored bits never exceed the width's mask.
                        prop_assert_eq!(c.bits(), ConstInt::from_bits(*w, c.bits()).bits());
                    }
                    ArgValue::Buffer(_) => prop_assert!(false, "no pointer params here"),
                }
            }
        }
    }

    /// Wrapping to a width is idempotent and agrees with sign extension.
    #[test]
    fn const_int_wrap_idempotent(
        value in any::<i64>(),
        width in prop_oneof![Just(1u32), Just(8), Just(16), Just(32), Just(64)],
    ) {
        let once = ConstInt::new(width, value);
        let twice = ConstInt::new(width, once.value());
        prop_assert_eq!(once, twice);
    }

    /// SplitMix64 forks derived from different function names diverge, and
    /// probability draws stay within [0, 1).
    #[test]
    fn splitmix_streams_behave(seed in any::<u64>()) {
        let mut r = SplitMix64::new(seed);
        for _ in 0..50 {
            let f = r.next_f64();
            prop_assert!((0.0..1.0).contains(&f));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// After splitting with any chunk size, no block body exceeds the chunk
    /// and the function still validates. Runs over two fixture shapes.
    #[test]
    fn split_chunk_bound_holds(chunk in 1usize..6, seed in any::<u64>()) {
        for file in ["ll/05_loop_sum.ll", "ll/16_icmp_preds.ll"] {
            let text = std::fs::read_to_string(common::fixture_root().join(file)).unwrap();
            let module = camo::text::parse_module(&text).unwrap();
            let cfg = ObfConfig { split_chunk: chunk, ..Default::default() };
            let mut rng = SplitMix64::new(seed);
            for f in module.definitions() {
                let out = split_blocks(f, &cfg, &mut rng).unwrap();
                prop_assert!(out.function.blocks.iter().all(|b| b.body.len() <= chunk));
                prop_assert_eq!(camo::ir::validate_function(&out.function), vec![]);
            }
        }
    }
}
