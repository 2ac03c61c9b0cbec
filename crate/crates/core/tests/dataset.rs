mod common;

use std::collections::HashSet;

use common::rng;
use fedmeasure::dataset::{
    corrupt, dirichlet_partition, gaussian_mixture, inject_duplicates, read_binary, read_csv, read_embeddings,
    write_binary, write_embeddings, Corruption, EmbeddingSet, MixtureSpec,
};
use fedmeasure::Error;
use proptest::prelude::*;
use rand::Rng;

fn spec(classes: usize, dim: usize, per_class: usize, seed: u64) -> MixtureSpec {
    let mut r = rng(seed ^ 0xabc);
    MixtureSpec {
        num_classes: classes,
        dim,
        class_means: (0..classes)
            .map(|_| (0..dim).map(|_| r.random_range(-3.0..3.0)).collect())
            .collect(),
        class_scales: vec![1.0; classes],
        points_per_class: per_class,
        seed,
    }
}

fn row_keys(set: &EmbeddingSet) -> Vec<(Vec<u64>, Option<u32>)> {
    let labels = set.labels();
    set.vectors()
        .row_iter()
        .enumerate()
        .map(|(i, r)| (r.iter().map(|v| v.to_bits()).collect(), labels.map(|l| l[i])))
        .collect()
}

fn binary_bytes(set: &EmbeddingSet) -> Vec<u8> {
    let mut out = Vec::new();
    write_binary(set, &mut out).unwrap();
    out
}

fn mean_shift(a: &EmbeddingSet, b: &EmbeddingSet) -> f64 {
    let (ma, mb) = (a.vectors().col_mean(), b.vectors().col_mean());
    ma.iter().zip(&mb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partition_is_a_multiset_split(seed: u64, sellers in 1usize..8, alpha in 0.05f64..5.0) {
        let set = gaussian_mixture(&spec(4, 3, 25, seed)).unwrap();
        let parts = dirichlet_partition(&set, sellers, alpha, seed).unwrap();
        prop_assert_eq!(parts.len(), sellers);
        let mut got: Vec<_> = parts.iter().flat_map(row_keys).collect();
        let mut want = row_keys(&set);
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn duplicates_only_reuse_input_rows(seed: u64, factor in 1usize..12) {
        let set = gaussian_mixture(&spec(3, 4, 20, seed)).unwrap();
        let dup = inject_duplicates(&set, factor, seed).unwrap();
        prop_assert_eq!(dup.len(), set.len());
        let input: HashSet<_> = row_keys(&set).into_iter().collect();
        prop_assert!(row_keys(&dup).iter().all(|r| input.contains(r)));
        let distinct: HashSet<_> = row_keys(&dup).into_iter().collect();
        prop_assert_eq!(distinct.len(), set.len().div_ceil(factor));
    }

    #[test]
    fn generators_are_reproducible(seed: u64) {
        let a = gaussian_mixture(&spec(3, 5, 10, seed)).unwrap();
        let b = gaussian_mixture(&spec(3, 5, 10, seed)).unwrap();
        prop_assert_eq!(binary_bytes(&a), binary_bytes(&b));
        for kind in Corruption::ALL {
            let x = corrupt(&a, kind, 3, seed).unwrap();
            let y = corrupt(&a, kind, 3, seed).unwrap();
            prop_assert_eq!(binary_bytes(&x), binary_bytes(&y));
        }
        let p = dirichlet_partition(&a, 3, 0.5, seed).unwrap();
        let q = dirichlet_partition(&a, 3, 0.5, seed).unwrap();
        prop_assert_eq!(p, q);
    }

    #[test]
    fn binary_round_trip(seed: u64, labeled: bool) {
        let mut set = gaussian_mixture(&spec(2, 6, 7, seed)).unwrap();
        if !labeled {
            set = EmbeddingSet::unlabeled(set.vectors().clone(), "x");
        }
        let back = read_binary(binary_bytes(&set).as_slice()).unwrap();
        prop_assert_eq!(back.vectors(), set.vectors());
        prop_assert_eq!(back.labels(), set.labels());
    }
}

#[test]
fn shift_and_scale_move_the_mean_monotonically() {
    for kind in [Corruption::Shift, Corruption::Scale] {
        let mut avg = [0.0; 5];
        for seed in 0..10 {
            let set = gaussian_mixture(&spec(3, 16, 40, seed)).unwrap();
            for (s, slot) in avg.iter_mut().enumerate() {
                *slot += mean_shift(&corrupt(&set, kind, s as u32 + 1, seed).unwrap(), &set) / 10.0;
            }
        }
        assert!(avg.windows(2).all(|w| w[1] >= w[0]), "{kind}: {avg:?}");
    }
}

#[test]
fn gaussian_perturbation_grows_with_severity() {
    let set = gaussian_mixture(&spec(3, 8, 50, 4)).unwrap();
    let msq: Vec<f64> = (1..=5)
        .map(|s| {
            let c = corrupt(&set, Corruption::Gaussian, s, 9).unwrap();
            let diff = c.vectors().sub(set.vectors()).unwrap();
            diff.as_slice().iter().map(|v| v * v).sum::<f64>() / set.len() as f64
        })
        .collect();
    assert!(msq.windows(2).all(|w| w[1] > w[0]), "{msq:?}");
}

#[test]
fn mask_zeroes_half_the_coordinates_at_top_severity() {
    let set = gaussian_mixture(&spec(2, 11, 30, 1)).unwrap();
    let masked = corrupt(&set, Corruption::Mask, 5, 2).unwrap();
    for r in masked.vectors().row_iter() {
        assert_eq!(r.iter().filter(|&&v| v == 0.0).count(), 5);
    }
    assert!(corrupt(&set, Corruption::Mask, 6, 2).is_err());
    assert!(corrupt(&set, Corruption::Mask, 0, 2).is_err());
}

#[test]
fn files_round_trip_through_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let set = gaussian_mixture(&spec(10, 4, 100, 3)).unwrap();
    for name in ["set.fdme", "set.csv"] {
        let path = dir.path().join(name);
        write_embeddings(&set, &path).unwrap();
        let back = read_embeddings(&path).unwrap();
        assert_eq!(back.len(), 1000);
        assert_eq!(back.vectors(), set.vectors());
        assert_eq!(back.labels(), set.labels());
        assert_eq!(back.name, "set");
    }
}

#[test]
fn malformed_inputs_are_rejected() {
    assert!(matches!(read_binary(&b"NOPE1234"[..]), Err(Error::NotEmbeddingFile)));
    let set = gaussian_mixture(&spec(2, 3, 4, 0)).unwrap();
    let bytes = binary_bytes(&set);
    assert!(matches!(
        read_binary(&bytes[..bytes.len() - 3]),
        Err(Error::Truncated(_))
    ));
    let ragged = "a,b,c\n1,2,3\n4,5\n";
    assert!(matches!(
        read_csv(ragged.as_bytes()),
        Err(Error::RaggedCsv {
            row: 2,
            expected: 3,
            found: 2
        })
    ));
}

#[test]
fn partition_needs_labels() {
    let set = EmbeddingSet::unlabeled(gaussian_mixture(&spec(2, 3, 4, 0)).unwrap().vectors().clone(), "u");
    assert!(matches!(dirichlet_partition(&set, 2, 1.0, 0), Err(Error::Unlabeled)));
}
