use metadist_bench::{build_variant, surrogate_score, Arch, Surrogate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn scores_are_deterministic() {
    let g = build_variant(5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let x = g.sample_extended(&mut rng).unwrap();
        let p = g.project(&x).unwrap();
        let a = surrogate_score(&g, 5, Arch::Cnn, &p, 9).unwrap();
        let b = surrogate_score(&g, 5, Arch::Cnn, &p, 9).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn different_seeds_give_different_fields() {
    let g = build_variant(3).unwrap();
    let x = g.sample_extended(&mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let a = Surrogate::new(&g, 3, Arch::Mlp, 1).unwrap().score(&x);
    let b = Surrogate::new(&g, 3, Arch::Mlp, 2).unwrap().score(&x);
    assert_ne!(a, b);
}

#[test]
fn scores_stay_in_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for v in 1..=5u8 {
        let g = build_variant(v).unwrap();
        for arch in Arch::ALL {
            let s = Surrogate::new(&g, v, arch, v as u64).unwrap();
            for _ in 0..10_000 {
                let y = s.score(&g.sample_extended(&mut rng).unwrap());
                assert!((0.0..=100.0).contains(&y), "{y}");
            }
        }
    }
}

#[test]
fn lipschitz_audit_within_subproblems() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for v in 1..=5u8 {
        let g = build_variant(v).unwrap();
        let sigs = g.enumerate_signatures().unwrap();
        for arch in Arch::ALL {
            let s = Surrogate::new(&g, v, arch, 17).unwrap();
            let bound = s.lipschitz_bound();
            assert!(bound.is_finite() && bound > 0.0);
            let mut worst: f64 = 0.0;
            for sig in &sigs {
                for _ in 0..400 {
                    let x = g.sample_in_signature(sig, &mut rng).unwrap();
                    // Same configuration, so only free continuous and integer values move.
                    let y = loop {
                        let y = g.sample_in_signature(sig, &mut rng).unwrap();
                        if sig.fixed.iter().all(|&(w, _)| y.get(w) == x.get(w)) {
                            break y;
                        }
                    };
                    let (zx, zy) = (s.normalized(&x), s.normalized(&y));
                    let dz = zx.iter().zip(&zy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    if dz > 0.0 {
                        worst = worst.max((s.score(&x) - s.score(&y)).abs() / dz);
                    }
                }
            }
            assert!(worst <= bound, "variant {v} {arch}: {worst} > {bound}");
            assert!(worst > 0.0);
        }
    }
}

#[test]
fn aggregation_has_signal_across_subproblems() {
    // Points of two subproblems that agree on their shared variables should
    // score closer than unrelated points, on average.
    let g = build_variant(3).unwrap();
    let s = Surrogate::new(&g, 3, Arch::Mlp, 5).unwrap();
    let sigs = g.enumerate_signatures().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let r = g.var("r").unwrap();
    let (mut near, mut far) = (0.0, 0.0);
    for _ in 0..2000 {
        let a = g.sample_in_signature(&sigs[0], &mut rng).unwrap();
        let mut b = g.sample_in_signature(&sigs[1], &mut rng).unwrap();
        let c = g.sample_in_signature(&sigs[1], &mut rng).unwrap();
        b.values[r.0] = a.get(r);
        near += (s.score(&a) - s.score(&b)).abs();
        far += (s.score(&a) - s.score(&c)).abs();
    }
    assert!(near < far, "{near} vs {far}");
}
