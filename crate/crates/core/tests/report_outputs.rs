use sticker_forge_core::imaging::{BinaryMask, PixelImage};
use sticker_forge_core::report::{parse_sweep_csv, strip_timings, write_report, RunSummary};
use sticker_forge_core::signs::{SignRecord, SignSet};
use sticker_forge_core::victim::{Classifier, ClassifierVerdict, Result as VResult};
use sticker_forge_core::AttackConfig;

/// Says "dark" when the mean intensity is below 100.
struct Darkness;

impl Classifier for Darkness {
    fn predict(&self, img: &PixelImage) -> VResult<ClassifierVerdict> {
        let mean = img.data().iter().map(|&v| v as f64).sum::<f64>() / img.data().len() as f64;
        let dark = mean < 100.0;
        ClassifierVerdict::from_probs(
            if dark { vec![0.25, 0.75] } else { vec![0.9, 0.1] },
            &["bright".to_string(), "dark".to_string()],
        )
    }
}

fn signs() -> SignSet {
    let mask = BinaryMask::from_fn(100, 100, |x, y| (10..90).contains(&x) && (10..90).contains(&y)).unwrap();
    let records = (0..3)
        .map(|i| SignRecord::new(format!("sign{i}"), PixelImage::filled(100, 100, [110 + i, 110, 110]).unwrap(), mask.clone(), "bright").unwrap())
        .collect();
    SignSet::new(records, vec!["bright".into(), "dark".into()]).unwrap()
}

fn config() -> AttackConfig {
    AttackConfig::from_json(r#"{"patterns": ["black", "white", "black-white"], "sizes": [20, 40, 60], "stride_pct": 10}"#).unwrap()
}

#[test]
fn summary_roundtrip_and_layout() {
    let signs = signs();
    let summary = RunSummary::collect(&signs, &config(), &Darkness, 2).unwrap();
    assert_eq!(summary.baseline.len(), 3);
    assert!(summary.baseline.iter().all(|b| b.predicted_label == "bright"));

    let black = &summary.patterns[0];
    assert!(black.attack_succeeded);
    assert_eq!(black.best.flipped_count(), 3);
    assert!((black.best.objective - 75.0).abs() < 1e-9);
    // white never darkens the image
    assert!(!summary.patterns[1].attack_succeeded);
    assert_eq!(summary.patterns[1].best.objective, 0.0);

    let back = RunSummary::from_json(&summary.to_json()).unwrap();
    assert_eq!(back, summary);

    let dir = tempfile::tempdir().unwrap();
    let written = write_report(&summary, Some(&signs), dir.path(), false).unwrap();
    for rel in [
        "summary.json",
        "tables/baseline.csv",
        "tables/best_confidence.md",
        "tables/best_labels.csv",
        "tables/sweep_black-white.csv",
        "tables/sweep_white.md",
        "images/sign0_black.png",
        "images/sign2_black-white.png",
    ] {
        assert!(dir.path().join(rel).is_file(), "{rel} missing");
    }
    assert_eq!(written.len(), 1 + 2 * (3 + 3) + 3 * 3);

    let csv = std::fs::read_to_string(dir.path().join("tables/sweep_black.csv")).unwrap();
    let grid = parse_sweep_csv(&csv).unwrap();
    assert_eq!(grid.best, black.grid.best);
    assert_eq!(grid.heights, vec![20, 40, 60]);
}

#[test]
fn timings_are_the_only_nondeterministic_part() {
    let signs = signs();
    let a = RunSummary::collect(&signs, &config(), &Darkness, 1).unwrap();
    let b = RunSummary::collect(&signs, &config(), &Darkness, 3).unwrap();
    assert_ne!(a.timings.workers, b.timings.workers);
    assert_eq!(a.deterministic_json(), b.deterministic_json());
    assert_eq!(strip_timings(&a.to_json()).unwrap(), a.deterministic_json());
    assert!(!a.deterministic_json().contains("timings"));
}

#[test]
fn inconsistent_summary_rejected() {
    let mut s = RunSummary::collect(&signs(), &config(), &Darkness, 1).unwrap();
    s.patterns[0].best.per_sign.pop();
    assert!(RunSummary::from_json(&s.to_json()).is_err());
}
