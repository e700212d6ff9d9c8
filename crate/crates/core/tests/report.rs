use yardloc::{
    evaluate_decision, generate_instance, prepared, solve, GeneratorSpec, ReportError, RunReport,
    TcsMode, UpperMode, UpperSolveConfig, REPORT_HEADER,
};

fn solved(seed: u64, mode: UpperMode) -> Option<(yardloc::Instance, RunReport)> {
    let spec = GeneratorSpec {
        node_count: 5,
        seed,
        ..Default::default()
    };
    let inst = generate_instance(&spec).unwrap();
    let config = UpperSolveConfig {
        mode,
        ..Default::default()
    };
    let inst = prepared(&inst).unwrap().into_owned();
    let out = solve(&inst, &config).ok()?;
    let report = RunReport::new(&inst, &out, mode, TcsMode::Exact, 0);
    Some((inst, report))
}

#[test]
fn parse_inverts_render() {
    let mut checked = 0;
    for seed in 0..12 {
        for mode in [UpperMode::Enumerate, UpperMode::Anneal] {
            let Some((_, report)) = solved(seed, mode) else {
                continue;
            };
            let text = report.render();
            assert!(text.starts_with(REPORT_HEADER));
            let back = RunReport::parse(&text).unwrap();
            assert_eq!(back, report);
            assert_eq!(back.render(), text);
            checked += 1;
        }
    }
    assert!(checked >= 12);
}

#[test]
fn reported_objective_reproduces() {
    for seed in 0..12 {
        let Some((inst, report)) = solved(seed, UpperMode::Enumerate) else {
            continue;
        };
        let parsed = RunReport::parse(&report.render()).unwrap();
        let decision = parsed.decision(&inst).unwrap();
        let plan = evaluate_decision(&inst, &decision, &UpperSolveConfig::default()).unwrap();
        let obj = plan.objective.unwrap();
        let reported = parsed.costs.objective;
        assert!((obj - reported).abs() <= 1e-9 * reported.abs().max(1.0));
        assert_eq!(plan.tcs.cost.z_total, parsed.costs.z_total);
    }
}

#[test]
fn rejects_foreign_files() {
    assert!(matches!(
        RunReport::parse("yardloc-report-v0\n"),
        Err(ReportError::Header)
    ));
    assert!(matches!(RunReport::parse(""), Err(ReportError::Header)));
    let (_, report) = solved(0, UpperMode::Enumerate).unwrap();
    let text = report.render().replace("\ncost ", "\ncosts ");
    assert!(matches!(
        RunReport::parse(&text),
        Err(ReportError::Record { .. })
    ));
    let text: String = report
        .render()
        .lines()
        .filter(|l| !l.starts_with("solver "))
        .map(|l| format!("{l}\n"))
        .collect();
    assert!(matches!(
        RunReport::parse(&text),
        Err(ReportError::Missing("solver"))
    ));
}

#[test]
fn summary_is_stable() {
    let (_, report) = solved(1, UpperMode::Enumerate).unwrap();
    let a = report.summary();
    assert_eq!(a, report.summary());
    let line = a.lines().find(|l| l.starts_with("objective")).unwrap();
    let shown: f64 = line["objective".len()..].trim().parse().unwrap();
    assert!((shown - report.costs.objective).abs() <= 5e-5);
}
