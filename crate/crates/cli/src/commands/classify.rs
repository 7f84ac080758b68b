use std::path::PathBuf;

use chainpulse::classify::{build_feature_matrix, evaluate_classifier, fit_boosted, fit_cart, fit_rusboost, LabelPolicy};
use chainpulse::ingest::filter_day_class;
use chainpulse::DayClass;
use clap::{Args, ValueEnum};

use super::{load_blocks, slug};
use crate::error::CliResult;
use crate::output::Outputs;
use crate::plot::{render_plot, Labels, PlotKind, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Cart,
    Boosted,
    Rusboost,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Cart => "CART",
            Method::Boosted => "Boosted-tree",
            Method::Rusboost => "RUSBoosted-tree",
        }
    }

    fn default_depth(self) -> usize {
        match self {
            Method::Cart => 10,
            Method::Boosted | Method::Rusboost => 8,
        }
    }
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Block CSV.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "rusboost")]
    pub method: Method,
    /// Miners kept as their own class; the rest become `Other`.
    #[arg(long, default_value_t = 8)]
    pub top_k: usize,
    /// Boosting rounds.
    #[arg(long, default_value_t = 100)]
    pub rounds: usize,
    /// Tree depth (default 10 for CART, 8 inside ensembles).
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Minimum rows per leaf (CART only).
    #[arg(long, default_value_t = 1)]
    pub min_leaf: usize,
    /// Held-out fraction of each class (its latest blocks).
    #[arg(long, default_value_t = 0.3)]
    pub test_frac: f64,
    /// Add the mempool snapshot to the features.
    #[arg(long)]
    pub mempool: bool,
    /// Restrict to these labels, e.g. `F2Pool,SlushPool`.
    #[arg(long, value_delimiter = ',')]
    pub classes: Vec<String>,
    /// Keep only blocks from working days or weekend days.
    #[arg(long)]
    pub day_class: Option<DayClass>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(a: ClassifyArgs, seed: Option<u64>) -> CliResult<Outputs> {
    let mut outputs = Outputs::new();
    let mut series = load_blocks(&a.input, &mut outputs)?;
    if let Some(dc) = a.day_class {
        series = filter_day_class(&series, dc);
    }
    let policy = LabelPolicy { top_k: a.top_k, include_mempool: a.mempool };
    let mut data = build_feature_matrix(&series, &policy)?;
    if !a.classes.is_empty() {
        let keep: Vec<&str> = a.classes.iter().map(String::as_str).collect();
        data = data.restrict_to(&keep)?;
    }
    let (train, test) = data.stratified_split(a.test_frac)?;
    let depth = a.max_depth.unwrap_or(a.method.default_depth());
    let model = match a.method {
        Method::Cart => fit_cart(&train, depth, a.min_leaf)?,
        Method::Boosted => fit_boosted(&train, a.rounds, depth)?,
        Method::Rusboost => fit_rusboost(&train, a.rounds, depth, seed.unwrap_or(0))?,
    };
    for w in &model.warnings {
        log::warn!("{w}");
    }
    let eval = evaluate_classifier(&model, &test)?;
    outputs.note(format!(
        "{}: accuracy {:.4}, sensitivity {:.4}, miss rate {:.4} on {} held-out blocks",
        a.method.label(),
        eval.accuracy,
        eval.sensitivity,
        eval.miss_rate,
        test.len()
    ));
    let out = &a.out;
    outputs.add(out.join("confusion.csv"), eval.confusion_csv());
    outputs.add(out.join("summary.csv"), eval.summary_csv(a.method.label()));
    let mut tpr = String::from("class,support,tpr,auc\n");
    for (i, m) in eval.per_class.iter().enumerate() {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        tpr.push_str(&format!("{},{},{},{}\n", m.class, m.support, opt(m.tpr), opt(m.auc())));
        if let Some(roc) = &m.roc {
            let name = format!("roc_{i}_{}", slug(&m.class));
            outputs.add(out.join(format!("{name}.csv")), roc.to_csv());
            let t = Table::new(&["fpr", "tpr"], roc.points.iter().map(|&(f, p)| vec![f, p]).collect());
            let labels = Labels::new(&format!("ROC, {} vs rest", m.class), "false positive rate (fraction)", "true positive rate (fraction)");
            outputs.add(out.join(format!("{name}.svg")), render_plot(&t, PlotKind::Roc, &labels)?);
        }
    }
    outputs.add(out.join("per_class.csv"), tpr);
    outputs.add(out.join("model.json"), model.to_json() + "\n");
    Ok(outputs)
}
