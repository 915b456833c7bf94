use genoshare_wasm::{preview_report, tradeoff_report, verify_report};

#[test]
fn tradeoff_improves_with_epsilon_and_is_reproducible() {
    let eps = [0.5, 2.0, 8.0];
    let points = tradeoff_report(40, 200, &eps, 3).unwrap();
    assert_eq!(points.len(), 3);
    assert!(points.windows(2).all(|w| w[1].avg_point_error <= w[0].avg_point_error));
    assert!(points.windows(2).all(|w| w[1].flip_probability < w[0].flip_probability));
    assert!(points.iter().all(|p| (0.0..=1.0).contains(&p.attack_auc)));
    assert_eq!(points, tradeoff_report(40, 200, &eps, 3).unwrap());

    assert!(tradeoff_report(40, 200, &[], 3).is_err());
    assert!(tradeoff_report(40, 200, &[-1.0], 3).is_err());
    assert!(tradeoff_report(5000, 5000, &[1.0], 3).is_err());
}

#[test]
fn verify_matches_the_closed_form() {
    let v = verify_report(3, 0.25, &[0.75, 0.9]).unwrap();
    assert!(v.passes);
    assert!((v.max_ratio - 81.0).abs() < 1e-9);

    let v = verify_report(4, 0.25, &[]).unwrap();
    assert!((v.epsilon_observed - 4.0 * 3f64.ln()).abs() < 1e-9);

    assert!(verify_report(3, 0.25, &[0.9]).is_err());
    assert!(verify_report(20, 0.25, &[]).is_err());
}

#[test]
fn preview_rows_are_consistent() {
    let pv = preview_report(4.0, "PER_BIT", 6, 10, 1).unwrap();
    assert_eq!(pv.original.len(), 6);
    for ((x, n), y) in pv.original.iter().zip(&pv.noise).zip(&pv.released) {
        assert_eq!(x.len(), 20);
        let xor: String = x.chars().zip(n.chars()).map(|(a, b)| if a == b { '0' } else { '1' }).collect();
        assert_eq!(&xor, y);
    }
    let ones: usize = pv.noise.iter().map(|r| r.matches('1').count()).sum();
    assert!((pv.flipped_fraction - ones as f64 / 120.0).abs() < 1e-12);

    assert!(preview_report(4.0, "BOTH", 6, 10, 1).is_err());
    assert!(preview_report(4.0, "PER_BIT", 100, 10, 1).is_err());
}
