use proptest::prelude::*;

use twinet::bench::{evaluate_instance, BenchMethod};
use twinet::elimination::{minfill_order, order_width, twin_order};
use twinet::jointree::{classical_separators, jointree_from_order, make_twin_jointree, twin_separators_direct};
use twinet::moral::moral_graph;
use twinet::parallel;
use twinet::randgen::{gen_rnet, gen_rnet2, to_rscm};
use twinet::thinning::{internal_mask, replay, replicate, thin, thinned_twin_separators};
use twinet::worlds::twin_dag;

fn dag(kind: u8, n: usize, k: usize, seed: u64) -> twinet::model::Dag {
    match kind % 3 {
        0 => gen_rnet(n, k, seed),
        1 => to_rscm(&gen_rnet(n, k, seed)),
        _ => gen_rnet2(n, k, seed),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn twin_order_width_bound(kind in 0u8..3, n in 2usize..25, k in 1usize..5, seed in any::<u64>()) {
        let d = dag(kind, n, k, seed);
        let order = minfill_order(&moral_graph(&d));
        let w = order_width(&moral_graph(&d), &order).unwrap();
        let (t, _, _) = twin_dag(&d).unwrap();
        let tw = order_width(&moral_graph(&t), &twin_order(&order, &d).unwrap()).unwrap();
        prop_assert!(tw <= 2 * w + 1);
    }

    #[test]
    fn lifted_jointree_bounds(kind in 0u8..3, n in 2usize..25, k in 1usize..5, seed in any::<u64>()) {
        let d = dag(kind, n, k, seed);
        let jt = jointree_from_order(&d, &minfill_order(&moral_graph(&d))).unwrap();
        let base = classical_separators(&jt);
        let twin = make_twin_jointree(&jt).unwrap();
        let classical = classical_separators(&twin);
        prop_assert_eq!(&twin_separators_direct(&base, &twin).unwrap(), &classical);
        prop_assert!(classical.width <= 2 * base.width + 1);
        prop_assert!(twin.node_count() <= 2 * jt.node_count().max(2));
    }

    #[test]
    fn thinning_is_sound_and_monotone(kind in 0u8..3, n in 2usize..20, k in 1usize..5, seed in any::<u64>(), bound in 0usize..4) {
        let d = dag(kind, n, k, seed);
        let f = internal_mask(&d);
        let jt = jointree_from_order(&d, &minfill_order(&moral_graph(&d))).unwrap();
        let rep = replicate(&jt, &f, bound);
        prop_assert!(rep.check().is_ok());
        let t = thin(&rep, &f);
        prop_assert!(t.thinned.width <= classical_separators(&jt).width);
        prop_assert_eq!(replay(&rep, &f, &t.log).unwrap(), t.thinned.separators.clone());
        let twin = make_twin_jointree(&t.jointree).unwrap();
        let lifted = thinned_twin_separators(&t, &twin).unwrap();
        prop_assert!(lifted.thinned.width <= 2 * t.thinned.width + 1);
    }

    #[test]
    fn parallel_map_keeps_order(xs in prop::collection::vec(any::<u32>(), 0..100), workers in 0usize..5) {
        let f = |x: &u32| x.wrapping_mul(2654435761);
        prop_assert_eq!(parallel::map(&xs, workers, f), parallel::map_sequential(&xs, f));
    }
}

#[test]
fn thinning_beats_twin_width_on_some_rscm_seed() {
    let improved = (0..50u64).any(|seed| {
        let w = evaluate_instance(&to_rscm(&gen_rnet(50, 5, seed)), 10, false).unwrap();
        w.get(BenchMethod::TwinMfRls).width < w.get(BenchMethod::TwinMf).width
    });
    assert!(improved);
}

#[test]
fn rscm_thinned_base_width_in_band() {
    let seeds = 0..50u64;
    let total: usize = seeds
        .clone()
        .map(|s| evaluate_instance(&to_rscm(&gen_rnet(50, 5, s)), 10, false).unwrap().get(BenchMethod::BaseMfRls).width)
        .sum();
    let mean = total as f64 / seeds.count() as f64;
    assert!((19.0 * 0.7..=19.0 * 1.3).contains(&mean), "mean {mean}");
}
