use pbmt::bundled::{subject, MINI_ATC};
use pbmt::campaign::{
    emit_plot_data, run_campaign, write_artifacts, CampaignConfig, CampaignError, CampaignReport, LoadedCampaign,
};
use pbmt::mutation::{MutantDescriptor, Site};
use pbmt::scoring::Label;
use pbmt::testgen::ClaimOutcome;

const MODEL: &str = "\
model limited
input u range=[0,100]
output y
block g Gain k=1.5
block lim Saturation lo=0 hi=110
line u.out1 -> g.in1
line g.out1 -> lim.in1
line lim.out1 -> y.in1
";

const PROPERTY: &str = "always (y <= 120)\n";

const CONFIG: &str = r#"{
  "schema": "pbmt.campaign/v1",
  "model": "limited.dfm",
  "property": "limited.stl",
  "sim": { "sample_time": 1.0, "horizon": 3.0 },
  "q_t": 2,
  "operators": ["StuckAt", "Bias", "Negate", "Absolute"],
  "overrides": { "StuckAt": { "value": 130.0 }, "Bias": { "offset": 5.0 } },
  "mutation_seed": 7,
  "strategies": [
    { "name": "ART", "params": { "n": 6, "candidates": 5 }, "seed": 1 },
    { "name": "SBTG", "params": { "runs": 2, "population_size": 4, "max_iterations": 5 }, "seed": 2 },
    { "name": "brute-force-oracle", "label": "Oracle", "params": { "levels": 3, "q_t": 2 }, "seed": 0 }
  ]
}"#;

fn limited(config: &str) -> Result<LoadedCampaign, CampaignError> {
    LoadedCampaign::from_sources(CampaignConfig::from_json(config)?, MODEL.into(), PROPERTY.into())
}

fn report() -> CampaignReport {
    run_campaign(&limited(CONFIG).unwrap(), Some(1)).unwrap()
}

/// The `op` mutant on the line into the output port.
fn mutant_of(r: &CampaignReport, op: &str) -> (usize, String) {
    let at_output = |d: &MutantDescriptor| d.operator == op && d.site == Site::Line("y.in1".into());
    let i = r.manifest.mutants.iter().position(at_output).unwrap();
    (i, r.manifest.mutants[i].id.clone())
}

/// `(variant, value, violated)` rows of the plot CSV.
fn plot_rows(csv: &str) -> Vec<(String, f64, u8)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[2].to_string(), f[3].parse().unwrap(), f[4].parse().unwrap())
        })
        .collect()
}

#[test]
fn small_campaign_labels_and_scores() {
    let r = report();
    assert!(r.invariants.all_hold(), "{:?}", r.invariants);
    assert!(r.failures.is_empty());
    // Four line sites, one per line and operator.
    assert_eq!(r.manifest.mutants.len(), 12);
    let label = |op: &str| {
        let (i, _) = mutant_of(&r, op);
        r.matrix.labels[i].label
    };
    assert_eq!(label("StuckAt"), Label::NtdPhi);
    assert_eq!(label("Bias"), Label::PhiTriviallyDifferent);
    assert_eq!(label("Absolute"), Label::Equivalent);
    let sbtg = &r.claims["SBTG"];
    assert_eq!(sbtg.len(), 12);
    let (_, stuck) = mutant_of(&r, "StuckAt");
    assert_eq!(sbtg[&stuck].outcome, ClaimOutcome::Killable);
    let oracle = &r.claims["Oracle"];
    let (_, abs) = mutant_of(&r, "Absolute");
    assert_eq!(oracle[&abs].outcome, ClaimOutcome::NotKillableOnGrid);
    assert_eq!(r.suite_rows("ART"), (0..6).collect::<Vec<_>>());
    assert!(r.find_test("ART-000").is_some());
}

#[test]
fn report_is_independent_of_worker_count() {
    let loaded = limited(CONFIG).unwrap();
    let one = run_campaign(&loaded, Some(1)).unwrap();
    let four = run_campaign(&loaded, Some(4)).unwrap();
    assert_eq!(one.canonical_json(), four.canonical_json());
    assert_eq!(one.canonical_json(), run_campaign(&loaded, Some(1)).unwrap().canonical_json());
}

#[test]
fn absolute_on_nonnegative_signals_is_equivalent() {
    let mut config = MINI_ATC.config();
    config.operators = Some(vec!["Absolute".into()]);
    config.sim.sample_time = 0.5;
    config.q_t = 4;
    config.strategies.truncate(1);
    config.strategies[0].params = serde_json::json!({ "n": 3, "candidates": 2 });
    config.strategies.push(
        serde_json::from_value(serde_json::json!({
            "name": "SBTG", "params": { "runs": 1, "population_size": 2, "max_iterations": 1 }, "seed": 3
        }))
        .unwrap(),
    );
    let r = run_campaign(&MINI_ATC.load_with(config).unwrap(), Some(1)).unwrap();
    assert_eq!(r.matrix.labels.len(), 34);
    assert!(r.matrix.labels.iter().all(|l| l.label == Label::Equivalent));
    assert_eq!(r.operator_table[0].phi_trivially_different_percent, Some(100.0));
}

#[test]
fn plot_data_marks_violations() {
    let r = report();
    let header = "time,signal,variant,value,violated";

    let (_, stuck) = mutant_of(&r, "StuckAt");
    let csv = emit_plot_data(&r, &stuck, "ART-000").unwrap();
    assert!(csv.starts_with(header));
    let rows = plot_rows(&csv);
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().filter(|r| r.0 == "original").all(|r| r.2 == 0));
    assert!(rows.iter().filter(|r| r.0 == "mutant").all(|r| r.1 == 130.0 && r.2 == 1));

    let (b, bias) = mutant_of(&r, "Bias");
    let t = (0..r.matrix.tests.len()).find(|&t| r.matrix.strongly_killed_by(t, b)).unwrap();
    assert!(!r.matrix.phi_killed_by(t, b));
    let rows = plot_rows(&emit_plot_data(&r, &bias, &r.matrix.tests[t]).unwrap());
    assert!(rows.iter().all(|r| r.2 == 0));
    let (orig, mutant) = rows.split_at(4);
    assert!(orig.iter().zip(mutant).all(|(o, m)| m.1 == o.1 + 5.0));

    let (_, abs) = mutant_of(&r, "Absolute");
    let rows = plot_rows(&emit_plot_data(&r, &abs, "ART-001").unwrap());
    let (orig, mutant) = rows.split_at(4);
    assert!(orig.iter().zip(mutant).all(|(o, m)| (o.1, o.2) == (m.1, m.2)));

    assert!(matches!(emit_plot_data(&r, "m9999", "ART-000"), Err(CampaignError::UnknownCell { .. })));
    assert!(matches!(emit_plot_data(&r, &abs, "ART-999"), Err(CampaignError::UnknownCell { .. })));
}

#[test]
fn artifacts_round_trip() {
    let r = report();
    let dir = tempfile::tempdir().unwrap();
    write_artifacts(&r, dir.path()).unwrap();
    for f in ["report.json", "manifest.json", "killmatrix.csv", "suite-ART.json", "suite-SBTG.json", "suite-Oracle.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let back: CampaignReport = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(back.canonical_json(), r.canonical_json());
}

#[test]
fn loading_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("limited.dfm"), MODEL).unwrap();
    std::fs::write(dir.path().join("limited.stl"), PROPERTY).unwrap();
    std::fs::write(dir.path().join("c.json"), CONFIG).unwrap();
    let loaded = LoadedCampaign::load(dir.path().join("c.json")).unwrap();
    assert_eq!(loaded.model.name, "limited");
    assert_eq!(loaded.base_dir, dir.path());

    std::fs::remove_file(dir.path().join("limited.stl")).unwrap();
    let err = LoadedCampaign::load(dir.path().join("c.json")).unwrap_err();
    assert_eq!(err.kind(), "ConfigError");
    let err = LoadedCampaign::load(dir.path().join("absent.json")).unwrap_err();
    assert_eq!(err.kind(), "IoError");
}

#[test]
fn config_errors() {
    let kind = |text: String| limited(&text).map(|_| ()).unwrap_err().kind();
    assert_eq!(kind(CONFIG.replace("pbmt.campaign/v1", "pbmt.campaign/v0")), "ConfigError");
    assert_eq!(kind(CONFIG.replace("\"q_t\": 2,", "\"q_t\": 0,")), "ConfigError");
    assert_eq!(kind(CONFIG.replace("\"label\": \"Oracle\"", "\"label\": \"ART\"")), "ConfigError");
    assert_eq!(kind(CONFIG.replace("\"sample_time\": 1.0", "\"sample_time\": -1.0")), "ConfigError");
    let bad_property = LoadedCampaign::from_sources(CampaignConfig::from_json(CONFIG).unwrap(), MODEL.into(), "always (z <= 1)".into());
    assert_eq!(bad_property.unwrap_err().kind(), "PropertyError");
    let bad_model = LoadedCampaign::from_sources(CampaignConfig::from_json(CONFIG).unwrap(), "block".into(), PROPERTY.into());
    assert_eq!(bad_model.unwrap_err().kind(), "ModelError");

    let run = |text: String| run_campaign(&limited(&text).unwrap(), Some(1)).map(|_| ()).unwrap_err().kind();
    assert_eq!(run(CONFIG.replace("\"Absolute\"]", "\"Rot13\"]")), "MutationError");
    assert_eq!(run(CONFIG.replace("\"name\": \"ART\"", "\"name\": \"Fuzz\"")), "ConfigError");
}

#[test]
fn bundled_subjects_load() {
    for name in ["mini-atc", "mini-actuator"] {
        let s = subject(name).unwrap();
        let loaded = s.load().unwrap();
        assert_eq!(loaded.config.strategies.len(), 3);
    }
    assert!(subject("nope").is_none());
}
