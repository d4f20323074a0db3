use proptest::prelude::*;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tsdm_core::corpus::{load_pool, write_manifest};
use tsdm_core::selection::length_filter_ids;
use tsdm_core::{
    greedy_select, ncd1, ncd_multiset_exact, ncd_pair, tsdm_reduce, CodecId, CoverageKind, CoverageMatrix, Pool,
};

fn random_payload(rng: &mut ChaCha8Rng, len: usize) -> Vec<u8> {
    let mut v = vec![0u8; len];
    rng.fill_bytes(&mut v);
    v
}

/// A small multiset where some members are copies of earlier ones.
fn mixed_pool(seed: u64, size: usize, max_len: usize) -> Pool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut payloads: Vec<Vec<u8>> = Vec::with_capacity(size);
    for _ in 0..size {
        if !payloads.is_empty() && rng.gen_bool(0.3) {
            let src = rng.gen_range(0..payloads.len());
            payloads.push(payloads[src].clone());
        } else {
            let len = rng.gen_range(1..=max_len);
            payloads.push(random_payload(&mut rng, len));
        }
    }
    Pool::new(payloads, CodecId::default())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chain_never_exceeds_exact(seed in any::<u64>(), size in 2usize..=7) {
        let pool = mixed_pool(seed, size, 200);
        let all: Vec<usize> = pool.ids().collect();
        let exact = ncd_multiset_exact(&pool, &all).unwrap().value();
        let seq = tsdm_reduce(&pool).unwrap();
        prop_assert!(seq.diameter <= exact, "{} > {}", seq.diameter, exact);
        if size == 2 {
            prop_assert_eq!(seq.diameter.to_bits(), exact.to_bits());
        }
    }

    #[test]
    fn distances_stay_in_range(seed in any::<u64>(), size in 2usize..=6) {
        let pool = mixed_pool(seed, size, 400);
        for a in pool.ids() {
            for b in pool.ids() {
                let d = ncd_pair(pool.codec(), pool.payload(a), pool.payload(b)).unwrap().value();
                prop_assert!((0.0..=1.1).contains(&d), "pair {a},{b}: {d}");
            }
        }
        let all: Vec<usize> = pool.ids().collect();
        for v in [ncd1(&pool, &all).unwrap().value(), ncd_multiset_exact(&pool, &all).unwrap().value()] {
            prop_assert!((0.0..=1.1).contains(&v), "{v}");
        }
        for v in tsdm_reduce(&pool).unwrap().step_diameters {
            prop_assert!((0.0..=1.1).contains(&v), "{v}");
        }
    }

    #[test]
    fn chain_is_a_nested_permutation(seed in any::<u64>(), size in 2usize..=12) {
        let pool = mixed_pool(seed, size, 80);
        let seq = tsdm_reduce(&pool).unwrap();
        let mut order = seq.full_order();
        prop_assert_eq!(seq.step_diameters.len(), size - 1);
        let mut sizes = seq.first_inclusion_sizes();
        sizes.sort_unstable();
        prop_assert_eq!(sizes, (1..=size).collect::<Vec<_>>());
        order.sort_unstable();
        prop_assert_eq!(order, (0..size).collect::<Vec<_>>());
        for k in 1..size {
            let small = seq.select_k(k).unwrap();
            let big = seq.select_k(k + 1).unwrap();
            prop_assert!(small.iter().all(|id| big.contains(id)));
        }
    }

    #[test]
    fn greedy_gains_never_increase(seed in any::<u64>(), rows in 1usize..20, units in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sets: Vec<Vec<usize>> = (0..rows)
            .map(|_| (0..units).filter(|_| rng.gen_bool(0.2)).collect())
            .collect();
        let names = (0..units).map(|u| format!("u{u}")).collect();
        let m = CoverageMatrix::from_sets(names, &sets, CoverageKind::Structural).unwrap();
        let picks = greedy_select(&m, rows).unwrap();
        let mut last_gain = usize::MAX;
        for k in 1..=rows {
            let gain = m.union_count(&picks[..k]) - if k == 1 { 0 } else { m.union_count(&picks[..k - 1]) };
            prop_assert!(gain <= last_gain);
            last_gain = gain;
        }
        prop_assert_eq!(m.union_count(&picks), m.union_count(&(0..rows).collect::<Vec<_>>()));
    }

    #[test]
    fn length_band_is_exact(lens in prop::collection::vec(0usize..300, 1..60), target in 1usize..300) {
        let pool = Pool::new(lens.iter().map(|&l| vec![b'x'; l]), CodecId::default());
        let kept = length_filter_ids(&pool, target, 0.1).unwrap();
        for (id, &len) in lens.iter().enumerate() {
            let inside = len * 10 >= target * 9 && len * 10 <= target * 11;
            prop_assert_eq!(kept.contains(&id), inside, "len {} target {}", len, target);
        }
    }
}

#[test]
fn a_duplicate_goes_before_any_unique_input() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut payloads: Vec<Vec<u8>> = (0..6).map(|_| random_payload(&mut rng, 512)).collect();
        let dup = rng.gen_range(0..6);
        let at = rng.gen_range(0..=6);
        payloads.insert(at, payloads[dup].clone());
        let pool = Pool::new(payloads, CodecId::default());
        let first = tsdm_reduce(&pool).unwrap().removal_order[0];
        let twins: Vec<usize> = pool.ids().filter(|&i| pool.payload(i) == pool.payload(first)).collect();
        assert_eq!(twins.len(), 2, "seed {seed}: removed {first}, a unique input");
    }
}

#[test]
fn manifest_round_trip_keeps_the_digest() {
    let dir = tempfile::tempdir().unwrap();
    let pool = mixed_pool(4, 9, 100);
    let path = dir.path().join("pool.jsonl");
    write_manifest(&pool, &path, Default::default()).unwrap();
    let back = load_pool(&path, None).unwrap();
    assert_eq!(back.digest(), pool.digest());
    assert_eq!(tsdm_reduce(&back).unwrap(), tsdm_reduce(&pool).unwrap());
}
