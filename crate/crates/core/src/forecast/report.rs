//! Comparison table: model rows against {MAE, RMSE} × {Weekend, Working, All} × {s, n}.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ForecastEvaluation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Weekend,
    Working,
    All,
}

impl Scope {
    pub const ALL: [Scope; 3] = [Scope::Weekend, Scope::Working, Scope::All];

    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Weekend => "weekend",
            Scope::Working => "working",
            Scope::All => "all",
        }
    }
}

/// Forecast target: block size `s` or transaction count `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Size,
    TxCount,
}

impl Target {
    pub const ALL: [Target; 2] = [Target::Size, Target::TxCount];

    pub fn suffix(self) -> &'static str {
        match self {
            Target::Size => "s",
            Target::TxCount => "n",
        }
    }
}

impl std::str::FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "size" | "s" => Ok(Target::Size),
            "tx_count" | "count" | "n" => Ok(Target::TxCount),
            other => Err(format!("unknown target '{other}' (expected size or tx_count)")),
        }
    }
}

/// Rows keep insertion order; missing cells print empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ForecastTable {
    rows: Vec<(String, BTreeMap<(Scope, Target), (f64, f64)>)>,
}

impl ForecastTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, model: &str, scope: Scope, target: Target, eval: &ForecastEvaluation) {
        let idx = match self.rows.iter().position(|(m, _)| m == model) {
            Some(i) => i,
            None => {
                self.rows.push((model.to_string(), BTreeMap::new()));
                self.rows.len() - 1
            }
        };
        self.rows[idx].1.insert((scope, target), (eval.mae, eval.rmse));
    }

    pub fn get(&self, model: &str, scope: Scope, target: Target) -> Option<(f64, f64)> {
        self.rows.iter().find(|(m, _)| m == model)?.1.get(&(scope, target)).copied()
    }

    pub fn models(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|(m, _)| m.as_str())
    }

    pub fn header() -> String {
        let mut cols = vec!["model".to_string()];
        for metric in ["mae", "rmse"] {
            for scope in Scope::ALL {
                for target in Target::ALL {
                    cols.push(format!("{metric}_{}_{}", scope.as_str(), target.suffix()));
                }
            }
        }
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::header();
        out.push('\n');
        for (model, cells) in &self.rows {
            out.push_str(model);
            for metric in 0..2 {
                for scope in Scope::ALL {
                    for target in Target::ALL {
                        out.push(',');
                        if let Some((mae, rmse)) = cells.get(&(scope, target)) {
                            let v = if metric == 0 { mae } else { rmse };
                            write!(out, "{v}").expect("write to string");
                        }
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_cells() {
        let mut t = ForecastTable::new();
        let e = ForecastEvaluation::from_residuals(vec![1.0, -1.0, 2.0]).unwrap();
        t.insert("NARX(2)", Scope::All, Target::TxCount, &e);
        t.insert("AR(2)", Scope::Weekend, Target::Size, &e);
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].split(',').count(), 13);
        assert!(lines[0].starts_with("model,mae_weekend_s,mae_weekend_n,mae_working_s"));
        assert!(lines[0].ends_with("rmse_all_s,rmse_all_n"));
        let narx: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(narx[0], "NARX(2)");
        assert_eq!(narx[6], format!("{}", 4.0 / 3.0));
        assert_eq!(narx[12], format!("{}", 2f64.sqrt()));
        assert_eq!(narx[1], "");
        assert_eq!(t.get("AR(2)", Scope::Weekend, Target::Size), Some((e.mae, e.rmse)));
        assert_eq!(t.models().collect::<Vec<_>>(), ["NARX(2)", "AR(2)"]);
        assert_eq!("size".parse::<Target>(), Ok(Target::Size));
        assert!("fee".parse::<Target>().is_err());
    }
}
