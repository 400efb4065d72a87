//! EMD to ground truth per instance, grouped by model and corruption level.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pcc_core::transport::{EmdSolver, EXACT_CAP};

use crate::data;
use crate::CliError;

/// One column of the report: a directory of completed clouds.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub model: String,
    pub level: String,
    pub dir: PathBuf,
}

impl RunSpec {
    /// `[MODEL[@LEVEL]=]DIR`.
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let (label, dir) = match s.split_once('=') {
            Some((label, dir)) => (label, dir),
            None => ("model", s),
        };
        if dir.is_empty() || label.is_empty() {
            return Err(CliError::Usage(format!("bad --run value {s:?}")));
        }
        let (model, level) = label.split_once('@').unwrap_or((label, "-"));
        Ok(RunSpec { model: model.to_string(), level: level.to_string(), dir: PathBuf::from(dir) })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalColumn {
    pub model: String,
    pub level: String,
    /// Exact when every cloud fits the exact solver.
    pub exact: bool,
    pub instances: Vec<(String, f64)>,
}

impl EvalColumn {
    pub fn mean(&self) -> f64 {
        self.instances.iter().map(|(_, v)| v).sum::<f64>() / self.instances.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub columns: Vec<EvalColumn>,
}

impl EvalReport {
    pub fn column(&self, model: &str, level: &str) -> Option<&EvalColumn> {
        self.columns.iter().find(|c| c.model == model && c.level == level)
    }

    /// `model<TAB>level<TAB>solver<TAB>id<TAB>emd_gt` rows.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# model\tlevel\tsolver\tid\temd_gt\n");
        for c in &self.columns {
            let solver = if c.exact { "exact" } else { "approx" };
            for (id, v) in &c.instances {
                writeln!(out, "{}\t{}\t{solver}\t{id}\t{v:.9e}", c.model, c.level).expect("writing to a String");
            }
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = format!("{:<16} {:>8} {:>6} {:>14}  solver\n", "model", "level", "n", "mean EMD-GT");
        for c in &self.columns {
            let solver = if c.exact {
                "exact".to_string()
            } else {
                "approx (auction, within 1% of optimal)".to_string()
            };
            writeln!(out, "{:<16} {:>8} {:>6} {:>14.6}  {solver}", c.model, c.level, c.instances.len(), c.mean())
                .expect("writing to a String");
        }
        out
    }
}

/// Scores every run against `ground_truth`; writes `report.tsv` and
/// `summary.txt` into `out` when given.
pub fn cmd_eval(runs: &[RunSpec], ground_truth: &Path, out: Option<&Path>) -> Result<EvalReport, CliError> {
    let truth = data::list_dir(ground_truth)?;
    let mut columns = Vec::with_capacity(runs.len());
    for run in runs {
        let entries = data::list_dir(&run.dir)?;
        if entries.is_empty() {
            return Err(CliError::Data(format!("{}: no completed clouds", run.dir.display())));
        }
        let mut instances = Vec::with_capacity(entries.len());
        let mut exact = true;
        for e in &entries {
            let gt_entry = truth
                .iter()
                .find(|g| g.id == e.id)
                .ok_or_else(|| CliError::Data(format!("{} has no ground truth in {}", e.id, ground_truth.display())))?;
            let done = data::load(&run.dir, e)?;
            let gt = data::load(ground_truth, gt_entry)?;
            if done.len() != gt.len() {
                return Err(CliError::Data(format!("{}: {} points, ground truth has {}", e.id, done.len(), gt.len())));
            }
            exact &= gt.len() <= EXACT_CAP;
            let m = EmdSolver::Auto.solve(&gt, &done).map_err(|err| CliError::Data(format!("{}: {err}", e.id)))?;
            instances.push((e.id.clone(), m.cost));
        }
        columns.push(EvalColumn { model: run.model.clone(), level: run.level.clone(), exact, instances });
    }
    let report = EvalReport { columns };
    if let Some(dir) = out {
        data::create_dir(dir)?;
        data::write(&dir.join("report.tsv"), report.to_tsv().as_bytes())?;
        data::write(&dir.join("summary.txt"), report.summary().as_bytes())?;
    }
    Ok(report)
}
