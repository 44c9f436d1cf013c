use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{within, BenchError, Category, ExperimentSuite, SuiteCase};
use crate::ctrl::{CtrlError, EpisodeOutcome, EpisodeTrace};
use crate::se2::ang_diff;
use crate::tasks::Thresholds;

/// Declared in every report header.
pub const TRAVEL_METRIC: &str =
    "robot travel: sum over pushes of the distance (m) from the pusher's rest position after the previous push to the next push's start point";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub category: usize,
    pub case: usize,
    pub repeat: usize,
    pub seed: u64,
    /// `None` when the episode aborted with an error.
    pub outcome: Option<EpisodeOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub steps: usize,
    /// Pushes until each threshold was first met.
    pub steps_to: Vec<Option<usize>>,
    pub travel: f64,
    pub prediction_error_mean: f64,
    pub final_position_error: f64,
    pub final_orientation_error: f64,
    pub fallbacks: usize,
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl EpisodeSummary {
    pub fn new(case: &SuiteCase, trace: Result<EpisodeTrace, CtrlError>, thresholds: &[Thresholds], wall_seconds: f64) -> Self {
        let base = Self {
            category: case.category,
            case: case.case,
            repeat: case.repeat,
            seed: case.seed,
            outcome: None,
            error: None,
            steps: 0,
            steps_to: vec![None; thresholds.len()],
            travel: 0.0,
            prediction_error_mean: 0.0,
            final_position_error: case.initial.object_pose.distance_to(&case.target),
            final_orientation_error: ang_diff(case.initial.object_pose.yaw(), case.target.yaw()),
            fallbacks: 0,
            wall_seconds,
        };
        match trace {
            Err(e) => Self { error: Some(e.to_string()), ..base },
            Ok(t) => {
                let last = t.final_pose();
                let n = t.steps.len();
                Self {
                    outcome: Some(t.outcome()),
                    steps: n,
                    steps_to: thresholds.iter().map(|th| t.first_step_where(|p| within(p, &case.target, th))).collect(),
                    travel: t.total_travel(),
                    prediction_error_mean: if n > 0 { t.steps.iter().map(|s| s.prediction_error()).sum::<f64>() / n as f64 } else { 0.0 },
                    final_position_error: last.distance_to(&case.target),
                    final_orientation_error: ang_diff(last.yaw(), case.target.yaw()),
                    fallbacks: t.steps.iter().filter(|s| s.fallback).count(),
                    ..base
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdStats {
    pub success_rate: f64,
    /// Steps of the successful episodes, ascending.
    pub steps: Vec<usize>,
    pub median_steps: Option<f64>,
    /// Episodes that never met the threshold.
    pub censored: usize,
}

impl ThresholdStats {
    fn of<'a>(episodes: impl Iterator<Item = &'a EpisodeSummary>, k: usize) -> Self {
        let mut total = 0;
        let mut steps = Vec::new();
        for e in episodes {
            total += 1;
            if let Some(s) = e.steps_to[k] {
                steps.push(s);
            }
        }
        steps.sort_unstable();
        let censored = total - steps.len();
        let success_rate = if total > 0 { steps.len() as f64 / total as f64 } else { 0.0 };
        Self { success_rate, median_steps: median(&steps.iter().map(|&s| s as f64).collect::<Vec<_>>()), steps, censored }
    }
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub category: Category,
    pub episodes: usize,
    pub thresholds: Vec<ThresholdStats>,
    pub travel_median: f64,
    pub travel_mean: f64,
    pub prediction_error_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub travel_metric: String,
    pub master_seed: u64,
    pub thresholds: Vec<Thresholds>,
    pub categories: Vec<CategoryReport>,
    pub episodes: Vec<EpisodeSummary>,
}

impl SuiteReport {
    pub fn assemble(suite: &ExperimentSuite, episodes: Vec<EpisodeSummary>) -> Self {
        let categories = suite
            .categories
            .iter()
            .enumerate()
            .map(|(ci, &category)| {
                let mine: Vec<&EpisodeSummary> = episodes.iter().filter(|e| e.category == ci).collect();
                let travel: Vec<f64> = mine.iter().map(|e| e.travel).collect();
                let pred: Vec<f64> = mine.iter().filter(|e| e.steps > 0).map(|e| e.prediction_error_mean).collect();
                CategoryReport {
                    category,
                    episodes: mine.len(),
                    thresholds: (0..suite.thresholds.len()).map(|k| ThresholdStats::of(mine.iter().copied(), k)).collect(),
                    travel_median: median(&travel).unwrap_or(0.0),
                    travel_mean: mean(&travel),
                    prediction_error_mean: mean(&pred),
                }
            })
            .collect();
        Self {
            name: suite.name.clone(),
            travel_metric: TRAVEL_METRIC.to_owned(),
            master_seed: suite.master_seed,
            thresholds: suite.thresholds.clone(),
            categories,
            episodes,
        }
    }

    /// Pooled statistics for threshold `k` over all episodes.
    pub fn overall(&self, k: usize) -> ThresholdStats {
        ThresholdStats::of(self.episodes.iter(), k)
    }

    pub fn travel_median(&self) -> f64 {
        median(&self.episodes.iter().map(|e| e.travel).collect::<Vec<_>>()).unwrap_or(0.0)
    }

    pub fn prediction_error_mean(&self) -> f64 {
        mean(&self.episodes.iter().filter(|e| e.steps > 0).map(|e| e.prediction_error_mean).collect::<Vec<_>>())
    }

    pub fn to_json(&self) -> Result<String, BenchError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per episode.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), BenchError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec![
            "category",
            "case",
            "repeat",
            "seed",
            "outcome",
            "steps",
            "travel",
            "prediction_error_mean",
            "final_position_error",
            "final_orientation_error",
            "fallbacks",
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
        header.extend((0..self.thresholds.len()).map(|k| format!("steps_to_{k}")));
        out.write_record(&header)?;
        for e in &self.episodes {
            let outcome = match (&e.outcome, &e.error) {
                (Some(EpisodeOutcome::Success), _) => "success",
                (Some(EpisodeOutcome::Exhausted), _) => "exhausted",
                (None, _) => "error",
            };
            let mut row = vec![
                e.category.to_string(),
                e.case.to_string(),
                e.repeat.to_string(),
                e.seed.to_string(),
                outcome.to_owned(),
                e.steps.to_string(),
                e.travel.to_string(),
                e.prediction_error_mean.to_string(),
                e.final_position_error.to_string(),
                e.final_orientation_error.to_string(),
                e.fallbacks.to_string(),
            ];
            row.extend(e.steps_to.iter().map(|s| s.map_or(String::new(), |v| v.to_string())));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `<stem>.json`, `<stem>.csv` and wall-clock timings to
    /// `<stem>.timings.csv` (kept apart so the report stays reproducible).
    pub fn save(&self, dir: &Path, stem: &str) -> Result<(), BenchError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.json")), self.to_json()?)?;
        self.write_csv(std::fs::File::create(dir.join(format!("{stem}.csv")))?)?;
        let mut t = csv::Writer::from_path(dir.join(format!("{stem}.timings.csv")))?;
        t.write_record(["category", "case", "repeat", "wall_seconds"])?;
        for e in &self.episodes {
            t.write_record([e.category.to_string(), e.case.to_string(), e.repeat.to_string(), format!("{:.3}", e.wall_seconds)])?;
        }
        t.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub category: Category,
    /// Improved over basic median steps, per threshold; `None` when either
    /// side has no successes.
    pub step_ratios: Vec<Option<f64>>,
    pub travel_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub basic: String,
    pub improved: String,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    /// Categories whose step ratio at threshold `k` is at most `bound`.
    pub fn count_at_most(&self, k: usize, bound: f64) -> usize {
        self.rows.iter().filter(|r| r.step_ratios[k].is_some_and(|x| x <= bound)).count()
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if den > 0.0 {
        Some(num / den)
    } else if num == 0.0 && den == 0.0 {
        Some(1.0)
    } else {
        None
    }
}

/// Per-category ratios of median steps and median travel.
pub fn compare_controllers(basic: &SuiteReport, improved: &SuiteReport) -> Result<Comparison, BenchError> {
    let same_cats = basic.categories.len() == improved.categories.len()
        && basic.categories.iter().zip(&improved.categories).all(|(a, b)| a.category == b.category)
        && basic.thresholds == improved.thresholds;
    let same_seeds = basic.master_seed == improved.master_seed;
    if !same_cats || !same_seeds {
        return Err(BenchError::CategoryMismatch);
    }
    let rows = basic
        .categories
        .iter()
        .zip(&improved.categories)
        .map(|(b, i)| ComparisonRow {
            category: b.category,
            step_ratios: b
                .thresholds
                .iter()
                .zip(&i.thresholds)
                .map(|(tb, ti)| match (tb.median_steps, ti.median_steps) {
                    (Some(x), Some(y)) => ratio(y, x),
                    _ => None,
                })
                .collect(),
            travel_ratio: ratio(i.travel_median, b.travel_median),
        })
        .collect();
    Ok(Comparison { basic: basic.name.clone(), improved: improved.name.clone(), rows })
}
