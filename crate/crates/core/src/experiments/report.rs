use std::io::Write;

use serde::Serialize;

use super::scenario::{sampling_label, ScenarioConfig};

/// One long-format observation. `group` carries a grid coordinate such as
/// `b=10` or `q=4` and is empty when there is none.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub metric: String,
    pub group: String,
    pub point: Option<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: String,
    pub scenario: Option<ScenarioConfig>,
    #[serde(skip)]
    pub records: Vec<Record>,
    pub checks: Vec<Check>,
    /// Headline numbers repeated in the JSON summary.
    pub summary: Vec<(String, f64)>,
}

impl Report {
    pub fn new(experiment: &str, scenario: Option<&ScenarioConfig>) -> Self {
        Report {
            experiment: experiment.to_string(),
            scenario: scenario.cloned(),
            records: Vec::new(),
            checks: Vec::new(),
            summary: Vec::new(),
        }
    }

    pub fn push(&mut self, metric: &str, group: impl Into<String>, point: Option<usize>, value: f64) {
        self.records.push(Record {
            metric: metric.to_string(),
            group: group.into(),
            point,
            value,
        });
    }

    /// Pushes one record per test point, numbered from 1.
    pub fn push_points(&mut self, metric: &str, group: &str, values: &[f64]) {
        for (k, &v) in values.iter().enumerate() {
            self.push(metric, group, Some(k + 1), v);
        }
    }

    pub fn scalar(&mut self, metric: &str, value: f64) {
        self.push(metric, "", None, value);
        self.summary.push((metric.to_string(), value));
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Columns `experiment, scenario, n, p, q, sampling, outcome, metric,
    /// group, point, value`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(
            out,
            "experiment,scenario,n,p,q,sampling,outcome,metric,group,point,value"
        )?;
        let fields = match &self.scenario {
            Some(s) => format!(
                "{},{},{},{},{},{}",
                s.name,
                s.n,
                s.p,
                s.mtry,
                sampling_label(s.sampling),
                s.outcome.as_str()
            ),
            None => ",,,,,".to_string(),
        };
        for r in &self.records {
            let point = r.point.map(|k| k.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.experiment, fields, r.metric, r.group, point, r.value
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["passed"] = serde_json::Value::Bool(self.passed());
        v
    }
}
