use hpdg::problems::ProblemKind;
use hpdg::smoother::Variant;
use hpdg_bench::experiments::{cycles, equivalence, history, model, partition_layouts};
use hpdg_bench::SolverSettings;

#[test]
fn cycles_report_rates_and_published_counts() {
    let s = SolverSettings::default();
    let r = cycles(&s, &[2, 3], &[2], ProblemKind::SinProduct).unwrap();
    for p in [2, 3] {
        let row = r.get(2, p).unwrap();
        assert!(row.converged);
        assert!(row.rate.is_some_and(|q| q > 0.0 && q < 1.0));
        assert!(row.published.is_some());
    }
    assert!(r.get(2, 2).unwrap().cycles < r.get(2, 3).unwrap().cycles);
}

#[test]
fn history_separates_smoother_and_multigrid() {
    let s = SolverSettings {
        tolerance: 1e-8,
        ..Default::default()
    };
    let h = history(&s, 2, 2, ProblemKind::TwoPeak, 200).unwrap();
    let smoother = h.curve("smoother").unwrap();
    let vcycle = h.curve("vcycle").unwrap();
    let exact = h.curve("exact").unwrap();
    assert_eq!(smoother.records.len(), 200);
    assert!(exact.records.len() <= vcycle.records.len());
    let last = |t: &hpdg::multigrid::CycleTrace| t.records.last().unwrap().r_l2 / t.r0_l2;
    assert!(last(vcycle) < 1e-6);
    assert!(last(smoother) > 1e-3);
}

#[test]
fn equivalence_sweeps_are_tight() {
    let s = SolverSettings::default();
    let r = equivalence(&s, 7, &[2], 2, ProblemKind::TwoPeak, 4, &[1, 3], &[1, 2]).unwrap();
    assert!(r.max_deviation() <= 1e-12);
    for row in &r.sweeps {
        if matches!(row.variant, Variant::Fused | Variant::Tasked) {
            assert!(row.bitwise, "{row:?}");
        }
    }
    assert!(r.traces.iter().all(|t| t.identical));
}

#[test]
fn partition_layouts_cover_both_modes() {
    let layouts = partition_layouts(&[1, 4]);
    assert!(layouts.iter().any(|(_, n)| *n == 1));
    assert!(layouts.iter().filter(|(_, n)| *n == 4).count() >= 2);
}

#[test]
fn fused_counter_matches_the_closed_form() {
    let r = model(&SolverSettings::default(), &[1, 2, 3], 2).unwrap();
    assert_eq!(r.table.len(), 60);
    assert!(r.table.iter().all(|row| row.published == Some(row.model)));
    let fused: Vec<_> = r.counters.iter().filter(|c| c.variant == Variant::Fused).collect();
    assert_eq!(fused.len(), 3);
    for c in fused {
        let n = (c.p + 1) as f64;
        assert_eq!(c.per_cell, 3.0 * n * n + 14.0 * n, "p={}", c.p);
    }
}
