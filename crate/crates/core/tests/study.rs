use pearson_core::estimators::{Estimator, NestedSk};
use pearson_core::models::sk::SkParams;
use pearson_core::optimizer::OptSchedule;
use pearson_core::sim::{simulate_sk_milstein, subsample, Path, SimConfig};
use pearson_core::study::*;
use proptest::prelude::*;
use serde_json::json;

fn row(est: Estimator, error: Vec<f64>, status: &str) -> ReplicationRow {
    ReplicationRow {
        replication: 0,
        estimator: est,
        h: 0.1,
        theta_hat: error.clone(),
        error,
        normalized_error: None,
        objective: 0.0,
        iterations: 1,
        wall_clock: 1.0,
        status: status.into(),
        outlier: false,
    }
}

fn col(v: &[f64]) -> Vec<Vec<f64>> {
    v.iter().map(|x| vec![*x]).collect()
}

#[test]
fn quantiles_interpolate() {
    assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
    assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);
    assert_eq!(quantile(&[7.0], 0.9), 7.0);
    assert!(quantile(&[], 0.5).is_nan());
    assert_eq!(median(&[3.0, f64::NAN, 1.0, 2.0]), 2.0);
}

#[test]
fn iqr_rule_on_a_clean_tail() {
    let mut v: Vec<f64> = (1..=10).map(f64::from).collect();
    v.extend([20.0, 60.0]);
    let one = iqr_outliers(&col(&v), OutlierRule { multiplier: 1.5, passes: 1 });
    let two = iqr_outliers(&col(&v), OutlierRule { multiplier: 1.5, passes: 2 });
    assert_eq!(one, two);
    assert_eq!(one.iter().filter(|f| **f).count(), 2);
    assert!(one[10] && one[11]);
}

#[test]
fn iqr_single_pass_is_not_idempotent() {
    let mut v: Vec<f64> = (1..=10).map(f64::from).collect();
    v.extend([17.0, 100.0]);
    let one = iqr_outliers(&col(&v), OutlierRule { multiplier: 1.5, passes: 1 });
    assert_eq!(one.iter().filter(|f| **f).count(), 1);
    assert!(one[11]);
    let two = iqr_outliers(&col(&v), OutlierRule { multiplier: 1.5, passes: 2 });
    assert!(two[10] && two[11]);
    let three = iqr_outliers(&col(&v), OutlierRule { multiplier: 1.5, passes: 3 });
    assert_eq!(two, three);
}

#[test]
fn iqr_flags_on_any_coordinate() {
    let mut rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, (i % 3) as f64]).collect();
    rows[4][1] = 50.0;
    let f = iqr_outliers(&rows, OutlierRule { multiplier: 1.5, passes: 1 });
    assert_eq!(f.iter().position(|x| *x), Some(4));
    assert_eq!(f.iter().filter(|x| **x).count(), 1);
}

#[test]
fn aggregates_count_failures_and_outliers() {
    let mut rows: Vec<ReplicationRow> = (0..10).map(|i| row(Estimator::Ss, vec![i as f64], "ok")).collect();
    rows.push(row(Estimator::Ss, vec![1000.0], "ok"));
    rows.push(row(Estimator::Ss, vec![f64::NAN], "flow-failure"));
    rows.push(row(Estimator::Em, vec![1.0], "ok"));
    let agg = aggregate_rows(&mut rows, OutlierRule { multiplier: 1.5, passes: 1 });
    assert_eq!(agg.len(), 2);
    let ss = &agg[0];
    assert_eq!((ss.n_total, ss.n_failed, ss.n_outliers), (12, 1, 1));
    assert!((ss.failure_pct - 100.0 / 12.0).abs() < 1e-12);
    assert!((ss.removal_pct - 100.0 / 12.0).abs() < 1e-12);
    assert_eq!(ss.median_error, vec![4.5]);
    assert_eq!(ss.iqr_error, vec![4.5]);
    assert!(rows[10].outlier && !rows[10].retained());
    assert!(!rows[11].outlier && !rows[11].ok());
    assert_eq!(agg[1].median_error, vec![1.0]);
}

#[test]
fn overrides_reach_the_config() {
    let mut doc = serde_json::to_value(StudyConfig::sk_default()).unwrap();
    apply_override(&mut doc, "replications", "3").unwrap();
    apply_override(&mut doc, "h-values", "0.01,0.05").unwrap();
    apply_override(&mut doc, "outlier_rule.passes", "1").unwrap();
    apply_override(&mut doc, "estimators", "[\"em\"]").unwrap();
    let cfg: StudyConfig = serde_json::from_value(doc.clone()).unwrap();
    assert_eq!(cfg.replications, 3);
    assert_eq!(cfg.h_values, vec![0.01, 0.05]);
    assert_eq!(cfg.outlier_rule.passes, 1);
    assert_eq!(cfg.estimators, vec![Estimator::Em]);
    cfg.validate().unwrap();
    apply_override(&mut doc, "bogus", "1").unwrap();
    assert!(serde_json::from_value::<StudyConfig>(doc).is_err());
    assert!(apply_override(&mut json!(3), "a", "1").is_err());
}

#[test]
fn scalar_override_of_a_list_becomes_a_singleton() {
    let mut doc = serde_json::to_value(StudyConfig::sk_default()).unwrap();
    apply_override(&mut doc, "h-values", "0.02").unwrap();
    apply_override(&mut doc, "estimators", "ll").unwrap();
    let cfg: StudyConfig = serde_json::from_value(doc).unwrap();
    assert_eq!(cfg.h_values, vec![0.02]);
    assert_eq!(cfg.estimators, vec![Estimator::Ll]);
}

#[test]
fn config_validation() {
    let mut c = StudyConfig::sk_default();
    c.h_values = vec![0.015];
    assert!(c.validate().is_err());
    let mut c = StudyConfig::sk_default();
    c.x0 = vec![0.0];
    assert!(c.validate().is_err());
    let mut c = StudyConfig::wf_default();
    c.replications = 0;
    assert!(c.validate().is_err());
    let mut c = StudyConfig::wf_default();
    c.model = ModelKind::Ou;
    assert!(c.validate().is_err());
}

#[test]
fn single_replication_em_study() {
    let mut cfg = StudyConfig::sk_default();
    cfg.replications = 1;
    cfg.estimators = vec![Estimator::Em];
    cfg.h_values = vec![0.02];
    cfg.t_total = 20.0;
    cfg.sd_path.t_total = 20.0;
    let rep = run_study(&cfg).unwrap();
    assert_eq!(rep.rows.len(), 1);
    assert_eq!(rep.aggregates.len(), 1);
    assert_eq!(rep.asymptotic_sd.len(), 1);
    assert_eq!(rep.param_names.len(), 8);
    let r = &rep.rows[0];
    assert_eq!(r.error.len(), 8);
    assert!(r.normalized_error.is_some());
    assert_eq!(rep.sd(0.02).unwrap().n, 1000);
    let again = run_study(&cfg).unwrap();
    assert_eq!(again.rows[0].theta_hat, r.theta_hat);
    let mut buf = Vec::new();
    rep.write_rows_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert!(text.starts_with("replication,estimator,h,param,error,wall_clock,status"));
    let mut buf = Vec::new();
    rep.write_bench_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
}

#[test]
fn nested_models_on_synthetic_series() {
    let truth = SkParams::paper_truth();
    let cfg = SimConfig { h_sim: 1e-4, n_steps: 1_000_000, seed: 9, stream: 0, x0: vec![0.0, 0.0] };
    let path = subsample(&simulate_sk_milstein(&truth, &cfg).unwrap(), 200).unwrap();
    let series = Path::new(path.step(), 1, path.coord(0)).unwrap();
    let models = [NestedSk::M1, NestedSk::M2, NestedSk::M3];
    let rep = icecore(&series, &models, Estimator::Ss, &SkParams::paper_init(), &OptSchedule::lbfgs(), json!({})).unwrap();
    assert_eq!(rep.fits.len(), 3);
    assert_eq!(rep.n_transitions, series.len() - 2);
    let m1 = &rep.fits[0];
    for i in [2, 4, 5, 6] {
        assert_eq!(m1.theta_hat[i], 0.0);
    }
    let m2 = &rep.fits[1];
    assert_eq!((m2.theta_hat[2], m2.theta_hat[4]), (0.0, 0.0));
    assert!(rep.fits.iter().all(|f| f.converged), "{:?}", rep.fits.iter().map(|f| &f.status).collect::<Vec<_>>());
    assert!(m2.nll <= m1.nll + 1e-9);
    assert!(rep.fits[2].nll <= m2.nll + 1e-9);
    assert!(m2.skew_t.is_some());
}

proptest! {
    #[test]
    fn iqr_never_flags_a_constant_or_tiny_set(x in -1e3f64..1e3, n in 1usize..20) {
        let rows = vec![vec![x, -x]; n];
        let rule = OutlierRule { multiplier: 1.5, passes: 3 };
        let flags = iqr_outliers(&rows, rule);
        prop_assert!(flags.iter().all(|f| !f));
    }

    #[test]
    fn more_passes_flag_a_superset(v in proptest::collection::vec(-50.0f64..50.0, 4..40), m in 0.5f64..3.0) {
        let rows = col(&v);
        let (r1, r2) = (OutlierRule { multiplier: m, passes: 1 }, OutlierRule { multiplier: m, passes: 2 });
        let a = iqr_outliers(&rows, r1);
        let b = iqr_outliers(&rows, r2);
        prop_assert!(a.iter().zip(&b).all(|(x, y)| !x || *y));
    }

    #[test]
    fn quantile_is_monotone(mut v in proptest::collection::vec(-1e3f64..1e3, 1..30), q1 in 0.0f64..1.0, q2 in 0.0f64..1.0) {
        v.sort_by(f64::total_cmp);
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        prop_assert!(quantile(&v, lo) <= quantile(&v, hi));
        prop_assert!(quantile(&v, 0.0) == v[0] && quantile(&v, 1.0) == v[v.len() - 1]);
    }
}
