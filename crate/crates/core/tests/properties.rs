//! Property tests for the solver, oracle, batch engine, losses and trainer.

use hardneg_core::arc_solver::{kkt_residuals, optimal_arc_distance, ArcProblem};
use hardneg_core::batch_engine::{
    build_pairs, combination_count, enumerate_combinations, optimal_distance_table, Label, LabeledBatch, Variant,
};
use hardneg_core::geometry::{chord_distance, normalize, UnitVec};
use hardneg_core::losses::{self, LossConfig, LossKind, TermKey};
use hardneg_core::oracle::grid_min_arc;
use hardneg_core::segment_solver::{optimal_segment_distance, segment_kkt_residuals, SegmentProblem};
use hardneg_core::trainer::{f1, nmi, recall_at_k, train, SyntheticSpec};
use proptest::prelude::*;
use std::collections::HashMap;

fn unit_vec(dim: usize) -> impl Strategy<Value = UnitVec> {
    prop::collection::vec(-1.0f64..1.0, dim).prop_filter_map("near-zero vector", |v| {
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        (n > 1e-3).then(|| normalize(&v).expect("nonzero"))
    })
}

fn arc_problem() -> impl Strategy<Value = ArcProblem> {
    (3usize..10)
        .prop_flat_map(|d| (unit_vec(d), unit_vec(d), unit_vec(d), unit_vec(d)))
        .prop_filter_map("antipodal endpoints", |(a, b, c, e)| ArcProblem::new(a, b, c, e).ok())
}

fn segment_problem() -> impl Strategy<Value = SegmentProblem> {
    (2usize..10)
        .prop_flat_map(|d| (unit_vec(d), unit_vec(d), unit_vec(d), unit_vec(d)))
        .prop_map(|(a, b, c, e)| {
            SegmentProblem::new(a.into_inner(), b.into_inner(), c.into_inner(), e.into_inner()).expect("valid")
        })
}

/// Class-major batch: `classes` blocks of `per_class` samples.
fn batch(classes: std::ops::Range<usize>, per_class: &'static [usize]) -> impl Strategy<Value = LabeledBatch> {
    (classes, prop::sample::select(per_class), 3usize..9).prop_flat_map(|(c, n, d)| {
        prop::collection::vec(unit_vec(d), c * n).prop_map(move |emb| {
            let labels = (0..c * n).map(|i| (i / n) as Label).collect();
            LabeledBatch::new(emb, labels).expect("balanced")
        })
    })
}

fn arc(a: &UnitVec, b: &UnitVec, c: &UnitVec, e: &UnitVec) -> ArcProblem {
    ArcProblem::new(a.clone(), b.clone(), c.clone(), e.clone()).expect("valid")
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn arc_envelope(p in arc_problem()) {
        let (x, y) = (p.x(), p.y());
        let corner = [(x.start(), y.start()), (x.start(), y.end()), (x.end(), y.start()), (x.end(), y.end())]
            .iter()
            .map(|(a, b)| chord_distance(a, b))
            .fold(f64::INFINITY, f64::min);
        prop_assert!(optimal_arc_distance(&p).distance <= corner + 1e-9);
    }

    #[test]
    fn arc_symmetry(p in arc_problem()) {
        let (x, y) = (p.x(), p.y());
        let d = optimal_arc_distance(&p).distance;
        let variants = [
            arc(x.end(), x.start(), y.start(), y.end()),
            arc(x.start(), x.end(), y.end(), y.start()),
            p.swapped(),
        ];
        for v in &variants {
            prop_assert!((optimal_arc_distance(v).distance - d).abs() <= 1e-9);
        }
    }

    #[test]
    fn arc_winner_satisfies_kkt(p in arc_problem()) {
        let s = optimal_arc_distance(&p);
        let k = s.candidate;
        let [ra, rb] = kkt_residuals(&p, &k);
        prop_assert!(ra.abs() <= 1e-8 && rb.abs() <= 1e-8, "{ra} {rb}");
        prop_assert!(k.lambda.iter().all(|&l| l <= 1e-9));
        if k.case_id == 0 {
            prop_assert!(k.lambda.iter().all(|&l| l == 0.0));
        }
        prop_assert!((chord_distance(&s.p1, &s.p2) - s.distance).abs() <= 1e-12);
    }

    #[test]
    fn segment_envelope_and_symmetry(p in segment_problem()) {
        let d = optimal_segment_distance(&p).expect("non-degenerate").distance;
        let corner = [(&p.x1, &p.y1), (&p.x1, &p.y2), (&p.x2, &p.y1), (&p.x2, &p.y2)]
            .iter()
            .map(|(a, b)| euclid(a, b))
            .fold(f64::INFINITY, f64::min);
        prop_assert!(d <= corner + 1e-9);
        let variants = [
            SegmentProblem::new(p.x2.clone(), p.x1.clone(), p.y1.clone(), p.y2.clone()).expect("valid"),
            SegmentProblem::new(p.x1.clone(), p.x2.clone(), p.y2.clone(), p.y1.clone()).expect("valid"),
            p.swapped(),
        ];
        for v in &variants {
            prop_assert!((optimal_segment_distance(v).expect("non-degenerate").distance - d).abs() <= 1e-9);
        }
    }

    #[test]
    fn segment_winner_satisfies_kkt(p in segment_problem()) {
        let s = optimal_segment_distance(&p).expect("non-degenerate");
        let [r1, r2] = segment_kkt_residuals(&p, &s.candidate);
        prop_assert!(r1.abs() <= 1e-8 && r2.abs() <= 1e-8, "{r1} {r2}");
        prop_assert!(s.candidate.lambda.iter().all(|&l| l <= 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn oracle_refinement_is_monotone(p in arc_problem(), r in 0.01f64..0.1) {
        let coarse = grid_min_arc(&p, r).best_distance;
        let fine = grid_min_arc(&p, r / 2.0).best_distance;
        prop_assert!(fine <= coarse);
        prop_assert!(optimal_arc_distance(&p).distance <= fine + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn combination_count_matches_enumeration(classes in 2usize..12, half in 1usize..5) {
        let n = 2 * half;
        let bs = classes * n;
        let labels: Vec<Label> = (0..bs).map(|i| (i % classes) as Label).collect();
        let pairs = build_pairs(&labels).expect("balanced");
        prop_assert_eq!(enumerate_combinations(&pairs).len(), bs * (bs - n) / 8);
        prop_assert_eq!(combination_count(bs, n).expect("balanced"), bs * (bs - n) / 8);
    }

    #[test]
    fn per_pair_min_bounded_by_endpoint_negatives(b in batch(2..5, &[2, 4])) {
        let t = optimal_distance_table(&b, Variant::Arc).expect("table");
        let pw = losses::pairwise(&b);
        for (p, pair) in t.positive_pairs.iter().enumerate() {
            let hardest = (0..b.len())
                .filter(|&k| b.labels()[k] != pair.label)
                .flat_map(|k| [pw.dist(pair.i, k), pw.dist(pair.j, k)])
                .fold(f64::INFINITY, f64::min);
            prop_assert!(t.per_pair_min[p] <= hardest + 1e-9);
        }
    }

    #[test]
    fn table_is_label_equivariant(b in batch(2..5, &[2, 4]), seed in any::<u64>()) {
        let labels = b.labels();
        let classes = b.classes();
        let mut order = classes.clone();
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        // Reorder the class blocks and rename each class.
        let mut perm = Vec::new();
        for &c in &order {
            perm.extend((0..b.len()).filter(|&i| labels[i] == c));
        }
        let emb: Vec<UnitVec> = perm.iter().map(|&i| b.embeddings()[i].clone()).collect();
        let relabel: Vec<Label> = perm.iter().map(|&i| labels[i] + 100).collect();
        let moved = LabeledBatch::new(emb, relabel).expect("balanced");
        let mut new_index = vec![0; b.len()];
        for (new, &old) in perm.iter().enumerate() {
            new_index[old] = new;
        }
        let t0 = optimal_distance_table(&b, Variant::Arc).expect("table");
        let t1 = optimal_distance_table(&moved, Variant::Arc).expect("table");
        prop_assert_eq!(t0.combinations.len(), t1.combinations.len());
        for (i, j, k, l, d) in t0.rows() {
            let moved_d = t1.get(new_index[i], new_index[j], new_index[k], new_index[l]).expect("present");
            prop_assert!((moved_d - d).abs() <= 1e-9);
        }
    }

    #[test]
    fn loop_losses_dominate(b in batch(2..4, &[2, 4])) {
        let cfg = LossConfig::default();
        let t = optimal_distance_table(&b, Variant::Arc).expect("table");
        let plain: HashMap<TermKey, f64> = losses::triplet(&b, &cfg).expect("loss").per_term.into_iter().collect();
        for (key, v) in losses::loop_triplet(&b, &t, &cfg).expect("loss").per_term {
            let &[i, j, k, l] = key.0.as_slice() else { unreachable!() };
            for (a, p) in [(i, j), (j, i)] {
                for neg in [k, l] {
                    prop_assert!(v + 1e-9 >= plain[&TermKey(vec![a, p, neg])]);
                }
            }
        }
        for (lo, pl) in [
            (LossKind::LoopHphn, LossKind::Hphn),
            (LossKind::LoopLs, LossKind::LiftedStructure),
        ] {
            let a = losses::evaluate(lo, &b, Some(&t), &cfg).expect("loss").total;
            let c = losses::evaluate(pl, &b, None, &cfg).expect("loss").total;
            prop_assert!(a + 1e-9 >= c);
        }
    }

    #[test]
    fn hphn_equals_ls_for_pairs(b in batch(2..6, &[2])) {
        let cfg = LossConfig::default();
        let h = losses::hphn_triplet(&b, &cfg).expect("loss");
        let l = losses::lifted_structure(&b, &cfg).expect("loss");
        prop_assert!((h.total - l.total).abs() <= 1e-12);
    }

    #[test]
    fn ms_loop_mining_is_superset(b in batch(2..5, &[2, 4])) {
        let cfg = LossConfig::default();
        let t = optimal_distance_table(&b, Variant::Arc).expect("table");
        let plain = losses::ms_mining(&b, &cfg).expect("mining");
        let lo = losses::loop_ms_mining(&b, &t, &cfg).expect("mining");
        prop_assert!(plain.negatives.iter().all(|p| lo.negatives.contains(p)));
        prop_assert_eq!(plain.positives, lo.positives);
    }

    #[test]
    fn hinge_losses_are_nonnegative(b in batch(2..4, &[2, 4])) {
        let cfg = LossConfig::default();
        let t = optimal_distance_table(&b, Variant::Arc).expect("table");
        for kind in [LossKind::Triplet, LossKind::LoopTriplet, LossKind::Hphn, LossKind::LoopHphn] {
            let v = losses::evaluate(kind, &b, kind.uses_table().then_some(&t), &cfg).expect("loss");
            prop_assert!(v.total >= 0.0 && v.per_term.iter().all(|(_, x)| *x >= 0.0));
        }
    }

    #[test]
    fn duplicating_class_blocks_keeps_triplet_mean(b in batch(2..4, &[2, 4])) {
        let cfg = LossConfig::default();
        let n = b.samples_per_class().expect("balanced");
        let mut emb = Vec::new();
        let mut labels = Vec::new();
        for block in 0..b.len() / n {
            for _ in 0..2 {
                emb.extend_from_slice(&b.embeddings()[block * n..(block + 1) * n]);
                labels.extend_from_slice(&b.labels()[block * n..(block + 1) * n]);
            }
        }
        let doubled = LabeledBatch::new(emb, labels).expect("balanced");
        let a = losses::triplet(&b, &cfg).expect("loss").total;
        let c = losses::triplet(&doubled, &cfg).expect("loss").total;
        prop_assert!((a - c).abs() <= 1e-9, "{a} vs {c}");
    }

    #[test]
    fn clustering_metrics_are_bounded(b in batch(2..5, &[2, 4])) {
        let classes = b.classes().len();
        let mut prev = 0.0;
        for k in 1..b.len() {
            let r = recall_at_k(&b, k);
            prop_assert!(r >= prev);
            prev = r;
        }
        prop_assert_eq!(prev, 1.0);
        for v in [nmi(&b, classes), f1(&b, classes)] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn training_keeps_unit_norm_and_is_deterministic(seed in 0u64..1000, loss in prop::sample::select(LossKind::ALL.to_vec())) {
        let spec = SyntheticSpec { num_classes: 3, samples_per_class: 4, dimension: 6, ..Default::default() };
        let a = train(&spec, loss, &LossConfig::default(), 15, 0.1, seed).expect("train");
        for e in a.embeddings.embeddings() {
            let n = e.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() <= 1e-9);
        }
        let b = train(&spec, loss, &LossConfig::default(), 15, 0.1, seed).expect("train");
        prop_assert_eq!(a, b);
    }
}
