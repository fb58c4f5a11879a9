use transient_scan::calibrate::calibrate_mc;
use transient_scan::mc::{self, run_design, table_designs, SimConfig, TableId};
use transient_scan::{ChartSpec, CovarianceModel, Error, ScenarioSpec};

fn id(n: usize) -> CovarianceModel {
    CovarianceModel::identity(n)
}

#[test]
fn uncrossable_threshold_gives_zero_fdp() {
    let spec = ChartSpec::Mewma { dim: 4, beta: 0.1, b: 1e9 };
    let e = mc::estimate_fdp(&spec, 50, &id(4), &SimConfig::new(2000, 1)).unwrap();
    assert_eq!(e.value, 0.0);
}

#[test]
fn zero_reps_is_rejected() {
    let spec = ChartSpec::Ewma { beta: 0.05, b: 2.95 };
    let r = mc::estimate_fdp(&spec, 20, &id(1), &SimConfig::new(0, 1));
    assert!(matches!(r, Err(Error::InvalidConfig(_))));
    assert!(mc::reproduce_table(TableId::T2, &SimConfig::new(0, 1)).is_err());
}

#[test]
fn same_seed_same_estimate() {
    let spec = ChartSpec::Mma { dim: 3, window: 10, h: 1.2 };
    let scen = ScenarioSpec::all_channels(3, 0.3, 15);
    let a = mc::estimate_pod(&spec, &scen, &id(3), &SimConfig::new(3000, 9)).unwrap();
    let b = mc::estimate_pod(&spec, &scen, &id(3), &SimConfig::new(3000, 9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn pod_grows_with_strength_and_horizon() {
    let design = table_designs(TableId::T4)
        .into_iter()
        .find(|d| d.key == "mewma")
        .unwrap();
    let rows = run_design(TableId::T4, &design, &SimConfig::new(2000, 4)).unwrap();
    for a in &rows {
        for b in &rows {
            if a.strength <= b.strength && a.horizon <= b.horizon {
                assert!(a.estimate <= b.estimate, "{a:?} vs {b:?}");
            }
        }
    }
}

#[test]
fn fdp_row_of_the_threshold_sweep() {
    let design = table_designs(TableId::T2)
        .into_iter()
        .find(|d| d.key == "mewma")
        .unwrap();
    let rows = run_design(TableId::T2, &design, &SimConfig::new(50_000, 12)).unwrap();
    let row = rows.iter().find(|r| (r.strength - 6.8).abs() < 1e-9).unwrap();
    assert!((row.approx.unwrap() - 0.0063).abs() < 1e-4, "{row:?}");
    assert!((row.estimate - 0.0065).abs() < 3.0 * row.std_error, "{row:?}");
}

#[test]
fn monte_carlo_calibration_of_ewma() {
    let spec = ChartSpec::Ewma { beta: 0.05, b: 2.0 };
    let c = calibrate_mc(&spec, 0.01, 20, &id(1), &SimConfig::new(20_000, 21)).unwrap();
    assert!(c.converged);
    assert!((c.threshold - 2.95).abs() < 0.03, "{c:?}");
}

#[test]
fn monte_carlo_calibration_of_hard_threshold_mewma() {
    let spec = ChartSpec::MewmaHard {
        dim: 20,
        beta: 0.05,
        cut: 0.25,
        level: 0.1,
    };
    let c = calibrate_mc(&spec, 0.01, 10, &id(20), &SimConfig::new(20_000, 22)).unwrap();
    assert!(c.converged);
    assert!((c.threshold - 0.396).abs() < 0.01, "{c:?}");
    assert!((c.estimate.value - 0.01).abs() < 2.0 * c.estimate.std_error);
}
