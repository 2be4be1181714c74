use super::run::CampaignReport;
use super::CampaignError;
use crate::dataflow::{SimConfig, Simulator, Trace};
use crate::lang::{parse_model, parse_stl};
use crate::mutation::OperatorRegistry;
use crate::stl::{robustness_signal, StlFormula};

/// The formula under any leading `always` / `eventually`: its pointwise
/// robustness marks the samples where the property is violated.
fn body(phi: &StlFormula) -> &StlFormula {
    match phi {
        StlFormula::Always(_, inner) | StlFormula::Eventually(_, inner) => body(inner),
        other => other,
    }
}

fn violations(trace: &Trace, phi: &StlFormula, cfg: &SimConfig) -> Result<Vec<bool>, CampaignError> {
    Ok(robustness_signal(trace, body(phi), cfg)?.into_iter().map(|r| r < 0.0).collect())
}

/// Long-format CSV (`time,signal,variant,value,violated`) of the model outputs
/// of the original and of `mutant_id` on test `test_id`, re-simulated from
/// the sources and manifest embedded in the report.
pub fn emit_plot_data(report: &CampaignReport, mutant_id: &str, test_id: &str) -> Result<String, CampaignError> {
    emit_plot_data_with(report, &OperatorRegistry::standard(), mutant_id, test_id)
}

pub fn emit_plot_data_with(
    report: &CampaignReport,
    operators: &OperatorRegistry,
    mutant_id: &str,
    test_id: &str,
) -> Result<String, CampaignError> {
    let unknown = || CampaignError::UnknownCell { mutant: mutant_id.into(), test: test_id.into() };
    let descriptor = report.manifest.mutants.iter().find(|d| d.id == mutant_id).ok_or_else(unknown)?;
    let test = report.find_test(test_id).ok_or_else(unknown)?;
    let model = parse_model(&report.model_source)?;
    let phi = parse_stl(&report.property_source, &model)?;
    let mutant = operators.apply(&model, descriptor)?;
    let cfg = report.config.sim;
    let run = |m| -> Result<Trace, CampaignError> {
        Simulator::new(m).and_then(|s| s.run(&test.test, &cfg)).map_err(|e| CampaignError::Simulation(e.to_string()))
    };
    let orig = run(&model)?;
    let mutated = run(&mutant.model)?;

    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["time", "signal", "variant", "value", "violated"])?;
    let times = orig.times();
    for (variant, trace) in [("original", &orig), ("mutant", &mutated)] {
        let marks = violations(trace, &phi, &cfg)?;
        for signal in model.outputs() {
            let values = trace.signal(&signal).ok_or_else(|| CampaignError::Simulation(format!("missing {signal}")))?;
            for (j, v) in values.iter().enumerate() {
                out.write_record([
                    times[j].to_string(),
                    signal.clone(),
                    variant.to_string(),
                    v.to_string(),
                    u8::from(marks[j]).to_string(),
                ])?;
            }
        }
    }
    let bytes = out.into_inner().map_err(|e| CampaignError::Simulation(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
}
