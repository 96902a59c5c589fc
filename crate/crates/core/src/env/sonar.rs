//! Sonar returns classification (rocks versus metal cylinders).
//!
//! The data file has one pattern per line: 60 comma-separated numbers in
//! `[0, 1]` followed by `R` or `M`, no header.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use sha2::{Digest, Sha256};

use super::Environment;
use crate::error::{Error, Result};

pub const SONAR_FEATURES: usize = 60;

/// A firing output unit predicts [`Label::Metal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Rock,
    Metal,
}

impl Label {
    pub fn from_output(fired: bool) -> Self {
        if fired {
            Label::Metal
        } else {
            Label::Rock
        }
    }

    pub fn letter(self) -> char {
        match self {
            Label::Rock => 'R',
            Label::Metal => 'M',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SonarDataset {
    pub patterns: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

impl SonarDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// True for the full published set: 208 patterns, 97 rocks, 111 metal.
    pub fn is_canonical(&self) -> bool {
        self.len() == 208 && self.count(Label::Rock) == 97 && self.count(Label::Metal) == 111
    }

    pub fn subset(&self, indices: &[usize]) -> SonarDataset {
        SonarDataset {
            patterns: indices.iter().map(|&i| self.patterns[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

pub fn parse_sonar(path: &Path) -> Result<SonarDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::unreadable(path, e))?;
    parse_sonar_str(&text, path)
}

/// Parses sonar text; `path` only labels diagnostics. Blank lines are
/// skipped.
pub fn parse_sonar_str(text: &str, path: &Path) -> Result<SonarDataset> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut patterns = Vec::new();
    let mut labels = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != SONAR_FEATURES + 1 {
            return Err(parse_err(
                line_no,
                format!(
                    "expected {} fields ({SONAR_FEATURES} values and a label), found {}",
                    SONAR_FEATURES + 1,
                    fields.len()
                ),
            ));
        }
        let mut values = Vec::with_capacity(SONAR_FEATURES);
        for (col, field) in fields[..SONAR_FEATURES].iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                parse_err(
                    line_no,
                    format!("field {}: cannot parse {field:?}", col + 1),
                )
            })?;
            if !(0.0..=1.0).contains(&v) {
                return Err(parse_err(
                    line_no,
                    format!("field {}: value {v} outside [0, 1]", col + 1),
                ));
            }
            values.push(v);
        }
        let label = match fields[SONAR_FEATURES] {
            "R" => Label::Rock,
            "M" => Label::Metal,
            other => {
                return Err(parse_err(
                    line_no,
                    format!("unknown label {other:?}, expected R or M"),
                ))
            }
        };
        patterns.push(values);
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::Data {
            path: path.to_path_buf(),
            message: "no patterns".into(),
        });
    }
    Ok(SonarDataset { patterns, labels })
}

/// SHA-256 over the exact bits of every value and label, hex encoded.
pub fn checksum(data: &SonarDataset) -> String {
    let mut h = Sha256::new();
    for (p, l) in data.patterns.iter().zip(&data.labels) {
        for v in p {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update([l.letter() as u8]);
    }
    h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Test-set size for `n` patterns: `fraction · n` rounded to the nearest
/// integer, kept within `[1, n − 1]`. 208 patterns at 0.1 give 21.
pub fn test_count(n: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config(format!(
            "split fraction must lie strictly between 0 and 1, got {fraction}"
        )));
    }
    if n < 2 {
        return Err(Error::config(format!("cannot split {n} patterns")));
    }
    Ok(((fraction * n as f64).round() as usize).clamp(1, n - 1))
}

/// Random disjoint `(train, test)` index sets covering `0..n`, each sorted.
pub fn split_indices<R: Rng + ?Sized>(
    n: usize,
    fraction: f64,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_test = test_count(n, fraction)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

pub fn split_dataset<R: Rng + ?Sized>(
    data: &SonarDataset,
    fraction: f64,
    rng: &mut R,
) -> Result<(SonarDataset, SonarDataset)> {
    let (train, test) = split_indices(data.len(), fraction, rng)?;
    Ok((data.subset(&train), data.subset(&test)))
}

/// Presents each pattern of a set for `hold_steps` consecutive steps in a
/// shuffled order and rewards outputs that match the label of the pattern
/// that was on the input `latency` steps earlier.
///
/// The label history survives [`reset`](Environment::reset), so the first
/// steps of an epoch are scored against the last pattern of the previous
/// one. Before `latency` steps have been presented at all the reward is 0.
#[derive(Debug, Clone)]
pub struct SonarTask {
    data: SonarDataset,
    hold_steps: usize,
    latency: usize,
    order: Vec<usize>,
    position: usize,
    history: VecDeque<Label>,
    scored: Option<Label>,
    reward: f64,
}

impl SonarTask {
    pub fn new(data: SonarDataset, hold_steps: usize, latency: usize) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::config("sonar task needs at least one pattern"));
        }
        if hold_steps < latency + 1 {
            return Err(Error::config(format!(
                "hold_steps ({hold_steps}) must be at least latency + 1 ({})",
                latency + 1
            )));
        }
        let order = (0..data.len()).collect();
        Ok(SonarTask {
            data,
            hold_steps,
            latency,
            order,
            position: 0,
            history: VecDeque::with_capacity(latency + 1),
            scored: None,
            reward: 0.0,
        })
    }

    pub fn data(&self) -> &SonarDataset {
        &self.data
    }

    pub fn hold_steps(&self) -> usize {
        self.hold_steps
    }

    pub fn latency(&self) -> usize {
        self.latency
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.data.len() * self.hold_steps
    }

    /// Row of the pattern currently on the input.
    pub fn current_index(&self) -> usize {
        let slot = (self.position / self.hold_steps).min(self.order.len() - 1);
        self.order[slot]
    }

    /// Steps already taken within the current presentation.
    pub fn offset_in_presentation(&self) -> usize {
        self.position % self.hold_steps
    }

    /// Label the last reward was computed against, if any.
    pub fn scored_label(&self) -> Option<Label> {
        self.scored
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Sets the presentation order for the next epoch without shuffling.
    pub fn set_order(&mut self, order: Vec<usize>) -> Result<()> {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted != (0..self.data.len()).collect::<Vec<_>>() {
            return Err(Error::config(
                "order must be a permutation of the pattern rows",
            ));
        }
        self.order = order;
        self.position = 0;
        Ok(())
    }

    /// Forgets earlier presentations; the next `latency` steps score 0.
    pub fn clear_history(&mut self) {
        self.history.clear();
        self.scored = None;
    }
}

impl Environment for SonarTask {
    fn observation_len(&self) -> usize {
        SONAR_FEATURES
    }

    /// Starts an epoch with a fresh shuffled order.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.order.shuffle(rng);
        self.position = 0;
        self.observe()
    }

    fn observe(&self) -> Vec<f64> {
        self.data.patterns[self.current_index()].clone()
    }

    fn act(&mut self, actions: &[bool]) -> Result<()> {
        let &[fired] = actions else {
            return Err(Error::config(format!(
                "sonar task takes one output, got {}",
                actions.len()
            )));
        };
        if self.done() {
            return Err(Error::contract("sonar epoch finished; reset before acting"));
        }
        self.history
            .push_back(self.data.labels[self.current_index()]);
        if self.history.len() > self.latency + 1 {
            self.history.pop_front();
        }
        self.scored = (self.history.len() == self.latency + 1).then(|| self.history[0]);
        self.reward = match self.scored {
            Some(label) if Label::from_output(fired) == label => 1.0,
            _ => 0.0,
        };
        self.position += 1;
        Ok(())
    }

    fn reward(&self) -> f64 {
        self.reward
    }

    fn done(&self) -> bool {
        self.position >= self.steps_per_epoch()
    }
}
