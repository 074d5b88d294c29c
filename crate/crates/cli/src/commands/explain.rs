use std::fmt::Write as _;

use chrono::NaiveDate;
use hydroformer::data::{FeatureSchema, Sample, Split, DATE_FORMAT};
use hydroformer::shap::{
    beeswarm_csv, beeswarm_export, explain_window, force_report, Explanation, ForceReport, GlobalImportance, ShapError,
};
use std::path::Path;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::run::{dataset_for, load_trained, write_file, Trained};

#[derive(Clone, Debug, Default)]
pub struct ExplainRequest {
    /// Explain the window anchored on this date.
    pub instance: Option<NaiveDate>,
    /// Explain `cfg.shap.sample` test windows and aggregate them.
    pub global: bool,
}

#[derive(Clone, Debug)]
pub struct InstanceExplanation {
    pub anchor: NaiveDate,
    pub explanation: Explanation,
    pub force: ForceReport,
}

#[derive(Clone, Debug, Default)]
pub struct ExplainOutcome {
    pub instance: Option<InstanceExplanation>,
    pub global: Option<GlobalImportance>,
    /// Per-instance explanations behind `global`, in sample order.
    pub explanations: Vec<InstanceExplanation>,
}

/// Evenly spaced picks of `n` out of `len`, first element included.
pub fn spaced_indices(len: usize, n: usize) -> Vec<usize> {
    if n >= len {
        return (0..len).collect();
    }
    (0..n).map(|j| j * len / n).collect()
}

fn explain_one(cfg: &RunConfig, trained: &Trained, sample: &Sample, names: &[String]) -> Result<InstanceExplanation, CliError> {
    let mc = trained.model.config();
    let explanation = explain_window(
        &trained.model,
        &sample.window,
        &trained.normalizer,
        mc.target_index,
        cfg.shap.lead,
        cfg.shap_method(),
    )
    .map_err(|e| match e {
        ShapError::TooManyPlayers { n, cap } => CliError::Config(format!(
            "exact enumeration over {n} features exceeds the cap of {cap}; pass --exact-cap {n} to override \
             (2^{n} model evaluations per instance)"
        )),
        other => other.into(),
    })?;
    let force = force_report(&explanation, names);
    Ok(InstanceExplanation {
        anchor: sample.anchor_date,
        explanation,
        force,
    })
}

/// Denormalized values on the anchor day of `sample`.
fn anchor_values(trained: &Trained, sample: &Sample) -> Vec<f64> {
    let w = &sample.window;
    let last = w.rows() - 1;
    (0..w.cols())
        .map(|c| trained.normalizer.denormalize(c, w.data()[last * w.cols() + c] as f64))
        .collect()
}

fn instance_table(ie: &InstanceExplanation, names: &[String], schema: &FeatureSchema, values: &[f64]) -> String {
    let e = &ie.explanation;
    let mut out = String::from("feature,group,value,phi,std_error,estimator\n");
    for (i, name) in names.iter().enumerate() {
        let _ = writeln!(
            out,
            "{name},{},{},{},{},{}",
            schema.features()[i].group.name(),
            values[i],
            e.phis[i],
            e.estimator.std_error(i),
            e.estimator.name()
        );
    }
    out
}

/// Writes SHAP tables for one instance and/or a global sample of the test
/// split into `cfg.out`.
pub fn cmd_explain(cfg: &RunConfig, checkpoint: &Path, req: &ExplainRequest) -> Result<ExplainOutcome, CliError> {
    if req.instance.is_none() && !req.global {
        return Err(CliError::Config("nothing to explain: pass --instance DATE and/or --global".into()));
    }
    cfg.validate()?;
    let trained = load_trained(checkpoint)?;
    if cfg.shap.lead > trained.model.config().horizon {
        return Err(CliError::Config(format!(
            "shap lead {} exceeds the trained horizon of {}",
            cfg.shap.lead,
            trained.model.config().horizon
        )));
    }
    cfg.echo_into(&cfg.out)?;
    let schema = FeatureSchema::lake();
    let names: Vec<String> = schema.names().iter().map(|s| s.to_string()).collect();
    let data = dataset_for(cfg, &trained, &schema)?;
    let mut outcome = ExplainOutcome::default();

    if let Some(date) = req.instance {
        let sample = data
            .samples
            .iter()
            .find(|s| s.anchor_date == date)
            .ok_or_else(|| CliError::Data(format!("no window is anchored on {date}")))?;
        let ie = explain_one(cfg, &trained, sample, &names)?;
        let tag = date.format(DATE_FORMAT);
        write_file(&cfg.out.join(format!("force_{tag}.csv")), ie.force.to_csv())?;
        write_file(
            &cfg.out.join(format!("explanation_{tag}.csv")),
            instance_table(&ie, &names, &schema, &anchor_values(&trained, sample)),
        )?;
        log::info!(
            "{tag}: base {:.4} → prediction {:.4} (gap {:.2e})",
            ie.explanation.phi0,
            ie.explanation.fx,
            ie.explanation.local_accuracy_gap()
        );
        outcome.instance = Some(ie);
    }

    if req.global {
        let test = data.split(Split::Test);
        let picks = spaced_indices(test.len(), cfg.shap.sample);
        let mut explanations = Vec::with_capacity(picks.len());
        let mut values = Vec::with_capacity(picks.len());
        for (n, &i) in picks.iter().enumerate() {
            explanations.push(explain_one(cfg, &trained, test[i], &names)?);
            values.push(anchor_values(&trained, test[i]));
            log::debug!("explained {}/{}", n + 1, picks.len());
        }
        let phis: Vec<Vec<f64>> = explanations.iter().map(|e| e.explanation.phis.clone()).collect();
        let global = GlobalImportance::from_phis(&phis, names.clone(), schema.groups())?;

        let mut detail = String::from("instance,anchor_date,feature,phi,std_error\n");
        let mut summary = String::from("instance,anchor_date,estimator,phi0,fx,local_accuracy_gap\n");
        for (k, ie) in explanations.iter().enumerate() {
            let e = &ie.explanation;
            let date = ie.anchor.format(DATE_FORMAT);
            for (i, name) in names.iter().enumerate() {
                let _ = writeln!(detail, "{k},{date},{name},{},{}", e.phis[i], e.estimator.std_error(i));
            }
            let _ = writeln!(
                summary,
                "{k},{date},{},{},{},{}",
                e.estimator.name(),
                e.phi0,
                e.fx,
                e.local_accuracy_gap()
            );
        }
        write_file(&cfg.out.join("explanations.csv"), detail)?;
        write_file(&cfg.out.join("explanation_summary.csv"), summary)?;
        write_file(&cfg.out.join("global_importance.csv"), global.to_csv())?;
        write_file(&cfg.out.join("group_shares.csv"), global.groups_csv())?;
        write_file(
            &cfg.out.join("beeswarm.csv"),
            beeswarm_csv(&beeswarm_export(&phis, &values, &names)?),
        )?;
        let top = global.ranking()[0];
        log::info!(
            "global importance over {} windows: top feature {} ({:.1}%)",
            picks.len(),
            names[top],
            global.percent[top]
        );
        outcome.global = Some(global);
        outcome.explanations = explanations;
    }
    Ok(outcome)
}
