use std::fmt::Write as _;

use chrono::{Days, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use transient_scan::ingest::{estimate_covariance, load_panel, parse_panel, standardized_returns};
use transient_scan::{ChartSpec, Error, MonitorMv};

/// Price file of `n` independent geometric random walks over `t` days.
fn random_walks(t: usize, n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
    let mut text = String::from("date");
    for j in 0..n {
        let _ = write!(text, ",S{j}");
    }
    text.push('\n');
    let mut prices = vec![100.0f64; n];
    for day in 0..t {
        let _ = write!(text, "{}", start.checked_add_days(Days::new(day as u64)).unwrap());
        for p in prices.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *p *= (0.01 * z).exp();
            let _ = write!(text, ",{p:.10}");
        }
        text.push('\n');
    }
    text
}

#[test]
fn returns_have_zero_mean_and_unit_variance() {
    let panel = parse_panel(random_walks(500, 3, 1).as_bytes()).unwrap().panel;
    let r = standardized_returns(&panel).unwrap();
    assert_eq!(r.panel.len(), 499);
    for j in 0..3 {
        let col = r.panel.column(j);
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.2, "{mean}");
        assert!((var - 1.0).abs() < 1e-10, "{var}");
    }
}

#[test]
fn independent_channels_have_small_correlations() {
    let t = 10_000;
    let panel = parse_panel(random_walks(t + 1, 4, 2).as_bytes()).unwrap().panel;
    let r = standardized_returns(&panel).unwrap();
    let est = estimate_covariance(&r.panel).unwrap();
    let sigma = est.model.sigma();
    let bound = 4.0 / (t as f64).sqrt();
    for i in 0..4 {
        assert_eq!(sigma[(i, i)], 1.0);
        for j in 0..i {
            assert!(sigma[(i, j)].abs() < bound, "{} vs {bound}", sigma[(i, j)]);
        }
    }
    assert!(!est.jittered);
}

#[test]
fn loading_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("prices.csv");
    std::fs::write(&path, random_walks(200, 5, 3)).unwrap();
    let a = load_panel(&path).unwrap();
    let b = load_panel(&path).unwrap();
    assert_eq!(a, b);
    let ra = standardized_returns(&a.panel).unwrap();
    let rb = standardized_returns(&b.panel).unwrap();
    let bits = |p: &transient_scan::ingest::Panel| -> Vec<u64> {
        p.values.iter().flatten().map(|x| x.to_bits()).collect()
    };
    assert_eq!(bits(&ra.panel), bits(&rb.panel));
}

#[test]
fn duplicated_channel_cannot_be_whitened() {
    let text = random_walks(300, 2, 4);
    let dup: String = text
        .lines()
        .map(|l| {
            let last = l.rsplit(',').next().unwrap();
            format!("{l},{}\n", if l.starts_with("date") { "copy" } else { last })
        })
        .collect();
    let panel = parse_panel(dup.as_bytes()).unwrap().panel;
    let r = standardized_returns(&panel).unwrap();
    assert!(matches!(estimate_covariance(&r.panel), Err(Error::NotPositiveDefinite)));
}

#[test]
fn whitened_panel_shows_an_injected_shift() {
    let panel = parse_panel(random_walks(400, 3, 5).as_bytes()).unwrap().panel;
    let mut r = standardized_returns(&panel).unwrap().panel;
    let est = estimate_covariance(&r).unwrap();
    for row in &mut r.values[200..210] {
        row[0] += 3.0;
    }
    let spec = ChartSpec::Mewma { dim: 3, beta: 0.1, b: 5.0 };
    let mut m = MonitorMv::new(&spec).unwrap();
    let first = r
        .values
        .iter()
        .map(|row| m.step(&est.model.whiten(row).unwrap()).unwrap())
        .find(|d| d.alarm)
        .map(|d| d.t);
    // step t consumes row t - 1
    assert!(matches!(first, Some(t) if (201..=212).contains(&t)), "{first:?}");
}
