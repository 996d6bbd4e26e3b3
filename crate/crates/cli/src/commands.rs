//! Subcommand implementations. Each takes the effective configuration and
//! writes its outputs under `config.out`.

use std::io::Write;
use std::path::{Path, PathBuf};

use covfloor::dgm::{self, OutcomeModelSpec};
use covfloor::experiments::{
    self, bias_diagnostics, candidate_overlap_sim, coverage_study,
    single_tree_variance_decomposition, variance_vs_b, FloorMode, NuisanceSource, OverlapResult,
    Preset, Report, Scenario, ScenarioConfig,
};
use covfloor::forest::ForestArtifact;
use covfloor::intervals::IntervalReport;
use covfloor::pasr::{self, PasrConfig};
use covfloor::{Forest, ForestConfig, OutcomeKind, SeedPath, TrainingFrame};

use crate::config::{FloorChoice, Format, NuisanceChoice, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{self, Metadata};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExperimentName {
    Oracle,
    VarianceVsB,
    Decomposition,
    Overlap,
    Alignment,
    Coverage,
    Bias,
}

impl ExperimentName {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::Oracle => "oracle",
            ExperimentName::VarianceVsB => "variance-vs-b",
            ExperimentName::Decomposition => "decomposition",
            ExperimentName::Overlap => "overlap",
            ExperimentName::Alignment => "alignment",
            ExperimentName::Coverage => "coverage",
            ExperimentName::Bias => "bias",
        }
    }
}

fn metadata(cfg: &RunConfig) -> Metadata {
    Metadata {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        extra: Vec::new(),
    }
}

fn out_path(cfg: &RunConfig, name: &str) -> CliResult<PathBuf> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    Ok(cfg.out.join(name))
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> CliResult<&'a Path> {
    path.as_deref()
        .ok_or_else(|| CliError::Config(format!("no {what} given")))
}

/// Trains the deployed forest, saves it, and writes its predictions.
pub fn cmd_fit(cfg: &RunConfig) -> CliResult<()> {
    let fc = &cfg.fit;
    let data_path = required(&fc.data, "training data (--data)")?;
    let data = io::read_table(data_path)?;
    let y = data.y.ok_or_else(|| {
        CliError::Config(format!("{} has no outcome column `y`", data_path.display()))
    })?;
    fc.outcome.validate(&y)?;
    let p = data.x.n_cols();
    let mtry = fc.mtry.unwrap_or_else(|| (p as f64).sqrt().ceil() as usize);
    let forest_cfg = ForestConfig::new(
        fc.trees,
        mtry,
        fc.sampling,
        fc.min_leaf,
    )
    .with_max_depth(fc.max_depth)
    .with_seed(cfg.seed);
    forest_cfg.validate(data.x.n_rows(), p)?;
    let points = match &fc.test {
        Some(t) => io::read_table(t)?.x,
        None => data.x.clone(),
    };
    let frame = TrainingFrame::new(data.x);
    let forest = Forest::fit(&frame, &y, fc.outcome, &forest_cfg)?;
    let pred = forest.predict_many(&points)?;

    let artifact = ForestArtifact::new(forest).to_json()?;
    let path = out_path(cfg, "forest.json")?;
    std::fs::write(&path, artifact).map_err(|e| CliError::io(&path, e))?;

    let meta = metadata(cfg);
    match cfg.format {
        Format::Csv => io::write_csv_file(&out_path(cfg, "predictions.csv")?, &meta, |w| {
            writeln!(w, "test_id,prediction,tree_variance,n_trees")?;
            for (k, (m, v)) in pred.mean.iter().zip(&pred.tree_variance).enumerate() {
                let v = v.map(|v| v.to_string()).unwrap_or_default();
                writeln!(w, "{},{m},{v},{}", k + 1, pred.n_trees)?;
            }
            Ok(())
        }),
        Format::Json => {
            let rows: Vec<serde_json::Value> = pred
                .mean
                .iter()
                .zip(&pred.tree_variance)
                .enumerate()
                .map(|(k, (m, v))| {
                    serde_json::json!({"test_id": k + 1, "prediction": m, "tree_variance": v})
                })
                .collect();
            io::write_json_file(
                &out_path(cfg, "predictions.json")?,
                &serde_json::json!({"metadata": meta.to_json(), "n_trees": pred.n_trees, "predictions": rows}),
            )
        }
    }
}

/// Nuisance fit, floor estimation and interval assembly for a saved forest.
pub fn cmd_uncertainty(cfg: &RunConfig) -> CliResult<()> {
    let uc = &cfg.uncertainty;
    let forest_path = required(&uc.forest, "forest artifact (--forest)")?;
    let text = std::fs::read_to_string(forest_path).map_err(|e| CliError::io(forest_path, e))?;
    let forest = ForestArtifact::from_json(&text)?;
    let kind = forest.outcome();
    if let Some(req) = uc.outcome {
        if req != kind {
            return Err(CliError::Config(format!(
                "requested {} intervals but the forest was fitted to {} outcomes",
                req.as_str(),
                kind.as_str()
            )));
        }
    }
    let data_path = required(&uc.data, "training data (--data)")?;
    let data = io::read_table(data_path)?;
    let y = data.y.ok_or_else(|| {
        CliError::Config(format!("{} has no outcome column `y`", data_path.display()))
    })?;
    kind.validate(&y)?;
    if data.x.n_rows() != forest.n_train() || data.x.n_cols() != forest.n_features() {
        return Err(CliError::Data(format!(
            "training data is {}x{}, the forest was fitted on {}x{}",
            data.x.n_rows(),
            data.x.n_cols(),
            forest.n_train(),
            forest.n_features()
        )));
    }
    let points = match &uc.test {
        Some(t) => io::read_table(t)?.x,
        None => data.x.clone(),
    };
    let frame = TrainingFrame::new(data.x);
    let root = SeedPath::new(cfg.seed);
    let (law, sigma2) = match kind {
        OutcomeKind::Continuous => {
            let nu = pasr::fit_nuisance_continuous(
                &frame,
                &y,
                uc.r_cf,
                uc.epsilon,
                root.child("nuisance").value(),
            )?;
            let s2 = nu.sigma2_at(&points)?;
            (pasr::NuisanceModel::Continuous(nu).law(), Some(s2))
        }
        OutcomeKind::Binary => {
            let nu = pasr::binary_nuisance_from_forest(&forest, frame.x())?;
            (pasr::NuisanceModel::Binary(nu).law(), None)
        }
    };
    let pasr_cfg = PasrConfig {
        r_syn: uc.r_syn,
        b_mc: uc.b_mc,
        r_cf: uc.r_cf,
        epsilon: uc.epsilon,
        seed: root.child("pasr").value(),
    };
    let floor = pasr::estimate_floor(&frame, &law, forest.config(), &points, &pasr_cfg)?;
    let pred = forest.predict_many(&points)?;
    let tree_var: Vec<f64> = pred.tree_variance.iter().map(|v| v.unwrap_or(0.0)).collect();
    let report = IntervalReport::build(
        kind,
        &pred.mean,
        sigma2.as_deref(),
        &tree_var,
        pred.n_trees,
        &floor.c_hat,
        uc.alpha,
    )?;

    let mut meta = metadata(cfg);
    meta.extra.push(("alpha".into(), uc.alpha.to_string()));
    meta.extra.push(("outcome".into(), kind.as_str().into()));
    match cfg.format {
        Format::Csv => {
            io::write_csv_file(&out_path(cfg, "intervals.csv")?, &meta, |w| report.write_csv(w))?;
            io::write_csv_file(&out_path(cfg, "floor.csv")?, &metadata(cfg), |w| floor.write_csv(w))
        }
        Format::Json => io::write_json_file(
            &out_path(cfg, "intervals.json")?,
            &serde_json::json!({
                "metadata": meta.to_json(),
                "report": report,
                "c_t_hat": floor.c_hat,
                "n_replicates": floor.n_replicates(),
                "b_mc": floor.b_mc,
            }),
        ),
    }
}

/// Scenario described by the experiment section.
pub fn scenario_config(cfg: &RunConfig) -> CliResult<ScenarioConfig> {
    let ec = &cfg.experiment;
    let preset: Preset = ec.preset.parse().map_err(CliError::Config)?;
    let mut sc = ScenarioConfig::preset(preset, ec.outcome).with_seed(cfg.seed);
    if let Some(n) = ec.n {
        sc.n = n;
    }
    if let Some(p) = ec.p {
        sc.p = p;
    }
    if let Some(q) = ec.mtry {
        sc.mtry = q;
    }
    if let Some(s) = ec.sampling {
        sc.sampling = s;
    }
    if let Some(s) = ec.min_leaf {
        sc.min_leaf = s;
    }
    if let Some(a) = ec.alpha {
        sc.alpha = a;
    }
    sc.budgets = ec.budgets.clone();
    sc.validate()?;
    Ok(sc)
}

/// Runs one experiment and writes its tidy table and summary. Returns the
/// report so callers can act on its checks.
pub fn cmd_experiment(name: ExperimentName, cfg: &RunConfig) -> CliResult<Report> {
    let ec = &cfg.experiment;
    let seed = SeedPath::new(cfg.seed).child(name.as_str()).value();
    let report = if name == ExperimentName::Overlap {
        let p = ec.p.unwrap_or(scenario_config(cfg)?.p);
        let mut qs = ec.q_grid.clone().unwrap_or_else(|| experiments::default_q_grid(p));
        if let Some(q) = ec.mtry {
            qs.push(q);
        }
        qs.sort_unstable();
        qs.dedup();
        let results = qs
            .iter()
            .map(|&q| candidate_overlap_sim(p, q, ec.overlap_trials, seed.wrapping_add(q as u64)))
            .collect::<Result<Vec<_>, _>>()?;
        OverlapResult::report(&results)
    } else {
        let scenario = Scenario::build(scenario_config(cfg)?)?;
        run_scenario_experiment(name, cfg, &scenario, seed)?
    };
    write_report(cfg, &report)?;
    Ok(report)
}

fn run_scenario_experiment(
    name: ExperimentName,
    cfg: &RunConfig,
    s: &Scenario,
    seed: u64,
) -> CliResult<Report> {
    let ec = &cfg.experiment;
    let b = &s.config.budgets;
    let root = SeedPath::new(seed);
    let oracle = || experiments::scenario_oracle(s, root.child("oracle").value());
    Ok(match name {
        ExperimentName::Oracle => oracle()?.report(s),
        ExperimentName::VarianceVsB => match &ec.b_grid {
            Some(grid) => variance_vs_b(
                &s.frame,
                &s.law,
                &s.config.forest(),
                grid,
                b.r_true,
                &s.points,
                seed,
            )?,
            None => experiments::scenario_curve(s, seed)?,
        }
        .report(s),
        ExperimentName::Decomposition => single_tree_variance_decomposition(
            &s.frame,
            &s.law,
            &s.config.forest(),
            ec.k_inbag,
            ec.m_inner,
            &s.points,
            seed,
        )?
        .report(s),
        ExperimentName::Alignment => {
            let grid = ec
                .q_grid
                .clone()
                .unwrap_or_else(|| experiments::default_q_grid(s.config.p));
            experiments::alignment_probe(
                &s.frame,
                &s.law,
                &s.config.forest().with_trees(b.b_mc),
                &grid,
                b.r_true,
                &s.points,
                seed,
            )?
            .report(s)
        }
        ExperimentName::Coverage => {
            let mode = match ec.floor {
                FloorChoice::Estimated => FloorMode::Estimated,
                FloorChoice::Zero => FloorMode::ForcedZero,
            };
            let o = match mode {
                FloorMode::Estimated => Some(oracle()?),
                FloorMode::ForcedZero => None,
            };
            coverage_study(s, mode, o.as_ref(), root.child("coverage").value())?.report(s)
        }
        ExperimentName::Bias => {
            let source = match ec.nuisance {
                NuisanceChoice::Fitted => NuisanceSource::Fitted,
                NuisanceChoice::True => NuisanceSource::TrueLaw,
            };
            bias_diagnostics(s, &oracle()?, b.s, source, root.child("bias").value())?.report(s)
        }
        ExperimentName::Overlap => unreachable!("handled without a scenario"),
    })
}

fn write_report(cfg: &RunConfig, report: &Report) -> CliResult<()> {
    let meta = metadata(cfg);
    let mut summary = report.to_json();
    summary["metadata"] = meta.to_json();
    match cfg.format {
        Format::Csv => {
            io::write_csv_file(&out_path(cfg, &format!("{}.csv", report.experiment))?, &meta, |w| {
                report.write_csv(w)
            })?;
        }
        Format::Json => {
            summary["records"] = serde_json::to_value(&report.records).expect("records serialize");
        }
    }
    io::write_json_file(&out_path(cfg, &format!("{}.json", report.experiment))?, &summary)
}

/// Writes a synthetic training set and anchored test points.
pub fn cmd_dgm(cfg: &RunConfig) -> CliResult<()> {
    let dc = &cfg.dgm;
    let root = SeedPath::new(cfg.seed);
    let design = dgm::gen_predictors(dc.n, dc.p, root.child("design").value())?;
    let spec = OutcomeModelSpec::new(dc.outcome, &design)?;
    let y = spec.law(design.full()).draw(root.child("outcome"));
    let test = dgm::make_test_points(&design, dc.n_test, dc.jitter_sd, root.child("test").value())?;
    let meta = metadata(cfg);
    let x = design.observed();
    io::write_csv_file(&out_path(cfg, "train.csv")?, &meta, |w| {
        covfloor::Dataset::new(x, y)
            .map_err(|e| std::io::Error::other(e.to_string()))?
            .write_csv(w)
    })?;
    let tx = test.observed();
    io::write_csv_file(&out_path(cfg, "test.csv")?, &meta, |w| {
        let header: Vec<String> = (1..=tx.n_cols()).map(|j| format!("x{j}")).collect();
        writeln!(w, "{},true_mean,true_sd", header.join(","))?;
        for (row, full) in tx.rows().zip(test.full().rows()) {
            let cells: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(
                w,
                "{},{},{}",
                cells.join(","),
                spec.conditional_mean(full),
                spec.conditional_sd(full)
            )?;
        }
        Ok(())
    })
}
