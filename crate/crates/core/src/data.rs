//! Randomized push episodes, dataset persistence and window extraction.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::window::{HistoryWindow, Triple};
use crate::perimeter::{cone_deviation, cone_direction, Perimeter};
use crate::rng::{derive_seed, stream_rng};
use crate::sim::{ObjectParams, PushCommand, RandomizationRanges, SimConfig, SimError, Simulator, WorldState};
use crate::{BodyPoint, Motion, Pose};

pub const SCHEMA_VERSION: u32 = 1;
/// Push magnitude separating the small and big test partitions.
pub const SMALL_BIG_BOUNDARY: f64 = 0.008;
const TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed dataset file at line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub episodes: usize,
    pub pushes_per_episode: usize,
    pub magnitude_range: [f64; 2],
    /// Total aperture of the push-direction cone about the inward normal.
    pub cone_degrees: f64,
    pub master_seed: u64,
    pub randomization: RandomizationRanges,
    pub sim: SimConfig,
    /// Train/validation/test fractions, by episode.
    pub split_fractions: [f64; 3],
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            episodes: 10_000,
            pushes_per_episode: 100,
            magnitude_range: [0.002, 0.03],
            cone_degrees: 90.0,
            master_seed: 0,
            randomization: RandomizationRanges::default(),
            sim: SimConfig::default(),
            split_fractions: [0.7, 0.2, 0.1],
        }
    }
}

impl DataConfig {
    /// Wider magnitude range used to train the improved controller's model.
    pub fn improved() -> Self {
        Self { magnitude_range: [0.003, 0.05], ..Self::default() }
    }

    pub fn half_cone(&self) -> f64 {
        0.5 * self.cone_degrees.to_radians()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    /// Object motion produced by this push, in the pre-push body frame.
    pub d_obj: Motion,
    pub ro: BodyPoint,
    pub d_ro: BodyPoint,
    pub episode_id: usize,
    pub step_index: usize,
    pub params: ObjectParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Test partition by the magnitude of the current push.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeClass {
    Small,
    Big,
}

impl SizeClass {
    pub fn of(magnitude: f64) -> Self {
        if magnitude < SMALL_BIG_BOUNDARY {
            SizeClass::Small
        } else {
            SizeClass::Big
        }
    }
}

impl std::str::FromStr for SizeClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "small" => Ok(SizeClass::Small),
            "big" => Ok(SizeClass::Big),
            _ => Err(format!("unknown subset {s:?} (expected small or big)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub id: usize,
    pub split: Split,
    pub records: Vec<InteractionRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub config: DataConfig,
    pub episodes: Vec<Episode>,
}

/// Initial yaw of an episode: one degree per episode index.
pub fn initial_yaw(episode_index: usize) -> f64 {
    ((episode_index % 360) as f64).to_radians()
}

pub fn generate_episode(episode_index: usize, cfg: &DataConfig, rng_seed: u64) -> Result<Vec<InteractionRecord>, SimError> {
    let mut rng = stream_rng(rng_seed, &[]);
    let params = cfg.randomization.sample(&mut rng);
    let sim = Simulator::new(cfg.sim);
    let perimeter = Perimeter::new(params.half_extents());
    let half = cfg.half_cone();
    let [lo, hi] = cfg.magnitude_range;
    let mut state = WorldState { object_pose: Pose::new(0.0, 0.0, initial_yaw(episode_index)), pusher_pos: [0.0, 0.0], params };
    let mut records = Vec::with_capacity(cfg.pushes_per_episode);
    for step_index in 0..cfg.pushes_per_episode {
        let (face, ro) = perimeter.sample(&mut rng);
        let offset = if half > 0.0 { rng.gen_range(-half..=half) } else { 0.0 };
        let mag = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        let d_ro = cone_direction(face, offset) * mag;
        let out = sim.step_push(&state, &PushCommand { start: ro, delta: d_ro })?;
        records.push(InteractionRecord { d_obj: out.motion, ro, d_ro, episode_id: episode_index, step_index, params });
        state = out.state;
    }
    Ok(records)
}

fn split_counts(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let train = ((fractions[0] * n as f64).round() as usize).min(n);
    let val = ((fractions[1] * n as f64).round() as usize).min(n - train);
    [train, val, n - train - val]
}

/// Seeded shuffle of episode ids into train/validation/test.
pub fn assign_splits(n: usize, fractions: [f64; 3], master_seed: u64) -> Vec<Split> {
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut stream_rng(master_seed, &[u64::MAX]));
    let [train, val, _] = split_counts(n, fractions);
    let mut out = vec![Split::Test; n];
    for (rank, &id) in ids.iter().enumerate() {
        out[id] = if rank < train {
            Split::Train
        } else if rank < train + val {
            Split::Val
        } else {
            Split::Test
        };
    }
    out
}

pub fn generate_dataset(cfg: &DataConfig) -> Result<Dataset, SimError> {
    let splits = assign_splits(cfg.episodes, cfg.split_fractions, cfg.master_seed);
    let episodes = (0..cfg.episodes)
        .into_par_iter()
        .map(|i| {
            let records = generate_episode(i, cfg, derive_seed(cfg.master_seed, &[i as u64]))?;
            Ok(Episode { id: i, split: splits[i], records })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(Dataset { config: cfg.clone(), episodes })
}

/// A training example: window ending at push `t` and the motion it produced.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSample {
    pub window: HistoryWindow,
    pub target: Motion,
    pub episode_id: usize,
    pub step_index: usize,
}

impl WindowSample {
    pub fn size_class(&self) -> SizeClass {
        SizeClass::of(self.window.current.d_ro.norm())
    }
}

fn triple_at(records: &[InteractionRecord], k: usize) -> Triple {
    let r = &records[k];
    let d_obj = if k == 0 { Motion::zero() } else { records[k - 1].d_obj };
    Triple { d_obj, ro: r.ro, d_ro: r.d_ro }
}

/// Sliding windows of length `w` within one episode. With `padding`, the
/// first `w - 1` pushes get windows filled up with zero triples.
pub fn episode_windows(records: &[InteractionRecord], w: usize, padding: bool) -> Vec<WindowSample> {
    assert!(w >= 1, "window length must be at least 1");
    let first = if padding { 0 } else { w };
    (first..records.len())
        .map(|t| {
            let past = (t as isize - w as isize + 1..t as isize)
                .map(|k| if k < 0 { Triple::zero() } else { triple_at(records, k as usize) })
                .collect();
            WindowSample {
                window: HistoryWindow { past, current: triple_at(records, t) },
                target: records[t].d_obj,
                episode_id: records[t].episode_id,
                step_index: records[t].step_index,
            }
        })
        .collect()
}

impl Dataset {
    pub fn records(&self) -> impl Iterator<Item = &InteractionRecord> {
        self.episodes.iter().flat_map(|e| e.records.iter())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Episode> {
        self.episodes.iter().filter(move |e| e.split == split)
    }

    pub fn windows(&self, split: Option<Split>, w: usize, padding: bool) -> Vec<WindowSample> {
        self.episodes.iter().filter(|e| split.is_none_or(|s| e.split == s)).flat_map(|e| episode_windows(&e.records, w, padding)).collect()
    }

    /// Checks every record against the generation invariants.
    pub fn validate(&self) -> Result<(), DataError> {
        let cfg = &self.config;
        let [lo, hi] = cfg.magnitude_range;
        let half = cfg.half_cone();
        for e in &self.episodes {
            for (k, r) in e.records.iter().enumerate() {
                let at = || format!("episode {} step {}", e.id, k);
                if r.episode_id != e.id || r.step_index != k {
                    return Err(DataError::Invariant(format!("{}: bad ids", at())));
                }
                let mag = r.d_ro.norm();
                if mag < lo - TOL || mag > hi + TOL {
                    return Err(DataError::Invariant(format!("{}: magnitude {mag} outside [{lo}, {hi}]", at())));
                }
                let per = Perimeter::new(r.params.half_extents());
                let face = per.face_of(r.ro);
                let off = per.normal_offset(face, r.ro);
                if (off - per.standoff).abs() > cfg.sim.contact_tolerance {
                    return Err(DataError::Invariant(format!("{}: start point off the perimeter by {}", at(), off - per.standoff)));
                }
                if cone_deviation(face, r.d_ro) > half + TOL {
                    return Err(DataError::Invariant(format!("{}: direction outside the cone", at())));
                }
                if !r.d_obj.dx.is_finite() || !r.d_obj.dy.is_finite() || !r.d_obj.dyaw().is_finite() {
                    return Err(DataError::Invariant(format!("{}: non-finite motion", at())));
                }
            }
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut out = BufWriter::new(out);
        let mut splits: BTreeMap<Split, Vec<usize>> = BTreeMap::new();
        for e in &self.episodes {
            splits.entry(e.split).or_default().push(e.id);
        }
        let header = Header { schema_version: SCHEMA_VERSION, master_seed: self.config.master_seed, config: self.config.clone(), splits };
        serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
        for r in self.records() {
            serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: Read>(input: R) -> Result<Self, DataError> {
        let mut lines = BufReader::new(input).lines();
        let fmt = |line: usize, msg: String| DataError::Format { line, msg };
        let head = lines.next().ok_or_else(|| fmt(1, "empty file".into()))??;
        let header: Header = serde_json::from_str(&head).map_err(|e| fmt(1, e.to_string()))?;
        if header.schema_version != SCHEMA_VERSION {
            return Err(fmt(1, format!("unsupported schema version {}", header.schema_version)));
        }
        let mut split_of = BTreeMap::new();
        for (split, ids) in &header.splits {
            for &id in ids {
                if split_of.insert(id, *split).is_some() {
                    return Err(fmt(1, format!("episode {id} listed in two splits")));
                }
            }
        }
        let mut by_episode: BTreeMap<usize, Vec<InteractionRecord>> = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: InteractionRecord = serde_json::from_str(&line).map_err(|e| fmt(i + 2, e.to_string()))?;
            by_episode.entry(r.episode_id).or_default().push(r);
        }
        let episodes = by_episode
            .into_iter()
            .map(|(id, mut records)| {
                records.sort_by_key(|r| r.step_index);
                let split = *split_of.get(&id).ok_or_else(|| fmt(1, format!("episode {id} has no split")))?;
                Ok(Episode { id, split, records })
            })
            .collect::<Result<Vec<_>, DataError>>()?;
        Ok(Dataset { config: header.config, episodes })
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        self.write_jsonl(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        Self::read_jsonl(std::fs::File::open(path)?)
    }
}

pub fn make_windows(dataset: &Dataset, w: usize, padding: bool) -> Vec<WindowSample> {
    dataset.windows(None, w, padding)
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    master_seed: u64,
    config: DataConfig,
    splits: BTreeMap<Split, Vec<usize>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(episodes: usize, seed: u64) -> DataConfig {
        DataConfig { episodes, master_seed: seed, ..DataConfig::default() }
    }

    #[test]
    fn initial_yaw_steps_by_one_degree() {
        let d = initial_yaw(1) - initial_yaw(0);
        assert!((d - 1f64.to_radians()).abs() < 1e-15);
        assert_eq!(initial_yaw(360), 0.0);
    }

    #[test]
    fn episode_is_deterministic_and_in_range() {
        let cfg = DataConfig::default();
        let a = generate_episode(3, &cfg, 11).unwrap();
        let b = generate_episode(3, &cfg, 11).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.len(), 100);
        for r in &a {
            let m = r.d_ro.norm();
            assert!((0.002 - 1e-12..=0.03 + 1e-12).contains(&m));
        }
        // most pushes move the object
        assert!(a.iter().filter(|r| r.d_obj.translation_norm() > 0.0).count() > 80);
    }

    #[test]
    fn dataset_counts_and_splits() {
        let ds = generate_dataset(&small_cfg(10, 5)).unwrap();
        assert_eq!(ds.records().count(), 1000);
        let n = |s| ds.split(s).count();
        assert_eq!((n(Split::Train), n(Split::Val), n(Split::Test)), (7, 2, 1));
        ds.validate().unwrap();

        let other = generate_dataset(&small_cfg(10, 6)).unwrap();
        assert_eq!(other.records().count(), 1000);
        assert_ne!(ds.episodes[0].records[0].params, other.episodes[0].records[0].params);
    }

    #[test]
    fn improved_magnitudes() {
        let cfg = DataConfig { episodes: 4, ..DataConfig::improved() };
        let ds = generate_dataset(&cfg).unwrap();
        ds.validate().unwrap();
        assert!(ds.records().all(|r| (0.003 - 1e-12..=0.05 + 1e-12).contains(&r.d_ro.norm())));
    }

    #[test]
    fn window_counts() {
        let ds = generate_dataset(&small_cfg(3, 1)).unwrap();
        let recs = &ds.episodes[0].records;
        let plain = episode_windows(recs, 4, false);
        let padded = episode_windows(recs, 4, true);
        assert_eq!(plain.len(), 96);
        assert_eq!(padded.len(), 100);
        assert_eq!(padded[0].window.past, vec![Triple::zero(); 3]);
        assert_eq!(padded[0].window.current.d_obj, Motion::zero());
        // step t's window carries the motion of push t-1 and predicts push t
        let s = &padded[10];
        assert_eq!(s.window.current.d_obj, recs[9].d_obj);
        assert_eq!(s.window.past[2].d_obj, recs[8].d_obj);
        assert_eq!(s.target, recs[10].d_obj);
        for s in make_windows(&ds, 4, true) {
            assert_eq!(s.window.len(), 4);
        }
        // windows never mix episodes: every window's start points belong to
        // the target's episode
        for e in &ds.episodes {
            for s in episode_windows(&e.records, 4, true) {
                assert_eq!(s.episode_id, e.id);
                for t in s.window.past.iter().filter(|t| **t != Triple::zero()) {
                    assert!(e.records.iter().any(|r| r.ro == t.ro));
                }
            }
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let ds = generate_dataset(&small_cfg(3, 9)).unwrap();
        let mut buf = Vec::new();
        ds.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 301);
        let back = Dataset::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn split_disjoint_and_sized() {
        let s = assign_splits(1000, [0.7, 0.2, 0.1], 4);
        let c = |x| s.iter().filter(|&&y| y == x).count();
        assert_eq!((c(Split::Train), c(Split::Val), c(Split::Test)), (700, 200, 100));
    }
}
