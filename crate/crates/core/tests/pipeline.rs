use std::path::{Path, PathBuf};

use evplan_core::milp::{solve_bb, SolveOptions};
use evplan_core::pipeline::{evaluate_delay, plan_artifacts, DelayParams};
use evplan_core::synthetic::random_instance;
use evplan_core::RunConfig;
use proptest::prelude::*;

fn demo_config(overrides: &[(&str, &str)]) -> RunConfig {
    let conf: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo/demo.conf");
    let mut cfg = RunConfig::from_file(&conf).unwrap();
    for (k, v) in overrides {
        cfg.set(k, v, Path::new(".")).unwrap();
    }
    cfg
}

#[test]
fn demo_uncapacitated_never_costs_more() {
    let cap = plan_artifacts(&demo_config(&[])).unwrap().report.unwrap();
    let uncap = plan_artifacts(&demo_config(&[("capacity", "none")]))
        .unwrap()
        .report
        .unwrap();
    assert!(
        uncap.objective <= cap.objective,
        "{} > {}",
        uncap.objective,
        cap.objective
    );
    assert_eq!(uncap.delay_cost, 0.0);
    assert!(uncap.warnings.iter().any(|w| w.contains("uncapacitated")));
}

#[test]
fn demo_report_is_consistent() {
    let art = plan_artifacts(&demo_config(&[])).unwrap();
    let report = art.report.unwrap();
    let open = report.stations.iter().filter(|s| s.open).count();
    assert_eq!(report.budget_used, open);
    assert!(open <= report.budget_cap);
    assert_eq!(report.objective, open as f64);
    assert!((report.augmented_objective - report.objective - report.delay_cost).abs() < 1e-12);
    let delay: f64 = report.stations.iter().map(|s| s.delay).sum();
    assert!((report.delay_cost - delay).abs() < 1e-12);
    assert!(report.calibration.is_some() && report.scenario.is_some());
    assert!(!art.curves.is_empty());
    for s in report.stations.iter().filter(|s| !s.open) {
        assert_eq!(s.inflow_per_week, 0.0, "closed station {} carries flow", s.candidate_id);
    }
}

#[test]
fn greedy_and_exact_agree_on_feasibility() {
    let exact = plan_artifacts(&demo_config(&[])).unwrap().report.unwrap();
    let greedy = plan_artifacts(&demo_config(&[("solver", "greedy")]))
        .unwrap()
        .report
        .unwrap();
    assert!(greedy.objective >= exact.objective);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Pushing more flow through one station never lowers the delay cost.
    #[test]
    fn delay_is_monotone_in_load(seed in any::<u64>(), beta in 1.0f64..6.0, scale in 0.1f64..3.0) {
        let inst = random_instance(seed, 8, 3);
        prop_assume!(!inst.uncapacitated);
        let sol = solve_bb(&inst, &SolveOptions::default()).unwrap();
        prop_assume!(sol.has_plan());
        let params = DelayParams { alpha: 0.15, beta, service_time_scale: scale };
        let base = evaluate_delay(&inst, &sol, 1.0, &params).unwrap();
        for (i, &open) in sol.y.iter().enumerate() {
            if !open {
                continue;
            }
            let mut heavier = inst.clone();
            heavier.sites[i].capacity *= 0.8;
            let more = evaluate_delay(&heavier, &sol, 1.0, &params).unwrap();
            prop_assert!(more.dc_ratio[i] >= base.dc_ratio[i]);
            prop_assert!(more.delay[i] >= base.delay[i]);
            prop_assert!(more.delay_cost >= base.delay_cost - 1e-15);
        }
    }
}
