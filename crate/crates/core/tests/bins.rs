mod common;

use stegopivot::bins::{build_bins_common, build_bins_random, build_sabins, build_sabins_logged};
use stegopivot::{BinAssignment, Scheme, SecretKey, Slot};

use common::{fixture, random_key, rng};

#[test]
fn files_round_trip_across_builds() {
    let fx = fixture();
    let mut r = rng("bins-files");
    let dir = tempfile::tempdir().unwrap();
    for i in 0..20 {
        let key = random_key(&mut r);
        let bits = 1 + r.below(4) as u32;
        let f = match i % 3 {
            0 => build_sabins(&fx.model, &fx.freqs, &fx.syndb, bits, &key),
            1 => build_bins_random(&fx.model, bits, &key),
            _ => build_bins_common(&fx.model, &fx.freqs, bits, &key, 8),
        }
        .unwrap();
        let path = dir.path().join(format!("f{i}.bins"));
        f.save(&path).unwrap();
        let loaded = BinAssignment::load(&path).unwrap();
        assert_eq!(loaded, f);
        assert_eq!(loaded.to_text(), f.to_text());
        assert_eq!(loaded.key_fingerprint(), key.fingerprint());
        loaded.check_vocab(&fx.model).unwrap();
    }
}

#[test]
fn toy_synonyms_land_in_distinct_bins() {
    let fx = fixture();
    let mut r = rng("toy-spread");
    for _ in 0..50 {
        let key = random_key(&mut r);
        let (f, log) = build_sabins_logged(&fx.model, &fx.freqs, &fx.syndb, 3, &key).unwrap();
        for chunk in &log.chunks {
            let mut bins: Vec<u32> = chunk.iter().map(|&(_, b)| b).collect();
            bins.sort_unstable();
            bins.dedup();
            assert_eq!(bins.len(), chunk.len());
            for &(token, bin) in chunk {
                assert_eq!(f.slot(token), Slot::Bin(bin));
            }
        }
        assert_eq!(f.scheme(), Scheme::SaBins);
    }
}

#[test]
fn bin_sizes_stay_balanced() {
    let fx = fixture();
    let key = SecretKey::from_passphrase("balance");
    for bits in 1..=4 {
        let f = build_bins_random(&fx.model, bits, &key).unwrap();
        let sizes: Vec<usize> = (0..f.bin_count() as u32)
            .map(|b| f.members(b).len())
            .collect();
        assert!(
            sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1,
            "{sizes:?}"
        );
    }
}

#[test]
fn different_keys_give_different_sabins() {
    let fx = fixture();
    let a = build_sabins(
        &fx.model,
        &fx.freqs,
        &fx.syndb,
        2,
        &SecretKey::from_passphrase("a"),
    )
    .unwrap();
    let b = build_sabins(
        &fx.model,
        &fx.freqs,
        &fx.syndb,
        2,
        &SecretKey::from_passphrase("b"),
    )
    .unwrap();
    let again = build_sabins(
        &fx.model,
        &fx.freqs,
        &fx.syndb,
        2,
        &SecretKey::from_passphrase("a"),
    )
    .unwrap();
    assert_eq!(a, again);
    assert_ne!(a.to_text(), b.to_text());
}
