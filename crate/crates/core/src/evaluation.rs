//! Predictions exchange file and the confusion-matrix report built from it.
//!
//! The exchange file is plain text with one prediction per line:
//!
//! ```text
//! # recording_id, state[, finger]
//! 0, null
//! 1, branch, 2
//! 2, obstructed:1
//! ```
//!
//! Blank lines and `#` comments are ignored. The finger may follow the state
//! as a third field or after a colon.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{classify, EstimatorConfig};
use crate::grasp::{GraspClass, GraspState};
use crate::layout::{Finger, FINGER_COUNT};
use crate::pipeline::extract_features;
use crate::recording::GraspRecording;
use crate::scalar::Scalar;

/// Per-class accuracies of the conventional rule method on hardware, in
/// reporting order (null, obstructed, good, branch).
pub const REFERENCE_ACCURACY: [f64; 4] = [0.966, 0.885, 0.521, 0.750];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prediction {
    pub id: usize,
    pub state: GraspState,
}

pub fn parse_predictions(text: &str) -> Result<Vec<Prediction>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Format(format!("predictions line {}: {what}: `{raw}`", n + 1));
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let id = fields[0].parse::<usize>().map_err(|_| bad("bad recording id"))?;
        let state = match fields.as_slice() {
            [_, state] => state.parse::<GraspState>(),
            [_, state, finger] => {
                let finger = finger.parse::<usize>().map_err(|_| bad("bad finger index"))?;
                let class = state.parse::<GraspClass>()?;
                Finger::new(finger).and_then(|f| GraspState::from_parts(class, Some(f)))
            }
            _ => return Err(bad("expected `id, state[, finger]`")),
        }
        .map_err(|e| bad(&e.to_string()))?;
        out.push(Prediction { id, state });
    }
    Ok(out)
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text)
}

pub fn format_predictions(predictions: &[Prediction]) -> String {
    let mut s = String::from("# recording_id, state[, finger]\n");
    for p in predictions {
        match p.state.finger() {
            Some(f) => writeln!(s, "{}, {}, {}", p.id, p.state.class().name(), f.index()),
            None => writeln!(s, "{}, {}", p.id, p.state.class().name()),
        }
        .expect("writing to a String");
    }
    s
}

pub fn write_predictions(predictions: &[Prediction], path: &Path) -> Result<()> {
    std::fs::write(path, format_predictions(predictions)).map_err(|e| Error::io(path, e))
}

/// Matches predictions to dataset ids, returning them in `ids` order.
pub fn reconcile(ids: &[usize], predictions: &[Prediction]) -> Result<Vec<GraspState>> {
    let mut by_id: BTreeMap<usize, GraspState> = BTreeMap::new();
    let mut duplicate = Vec::new();
    for p in predictions {
        if by_id.insert(p.id, p.state).is_some() && !duplicate.contains(&p.id) {
            duplicate.push(p.id);
        }
    }
    let known: std::collections::BTreeSet<usize> = ids.iter().copied().collect();
    let missing: Vec<usize> = known.iter().filter(|id| !by_id.contains_key(id)).copied().collect();
    let extra: Vec<usize> = by_id.keys().filter(|id| !known.contains(id)).copied().collect();
    duplicate.sort_unstable();
    if !(missing.is_empty() && extra.is_empty() && duplicate.is_empty()) {
        return Err(Error::Reconciliation {
            missing,
            extra,
            duplicate,
        });
    }
    Ok(ids.iter().map(|id| by_id[id]).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub dataset_digest: String,
    /// Rows are labelled classes, columns predicted classes, both in
    /// [`GraspClass::ALL`] order.
    pub confusion: [[usize; 4]; 4],
    /// Branch recordings only. Rows are the labelled finger; columns 0..4 the
    /// predicted branch finger, column 4 any non-branch prediction.
    pub branch_fingers: [[usize; FINGER_COUNT + 1]; FINGER_COUNT],
    pub per_class_accuracy: [f64; 4],
    /// Fraction of branch recordings predicted as branch on the right finger.
    pub localization_accuracy: f64,
    pub overall_accuracy: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvaluationReport {
    pub fn from_pairs(labels: &[GraspState], predictions: &[GraspState], digest: &str) -> Result<Self> {
        if labels.len() != predictions.len() {
            return Err(Error::Argument(format!(
                "{} labels but {} predictions",
                labels.len(),
                predictions.len()
            )));
        }
        let mut confusion = [[0usize; 4]; 4];
        let mut branch_fingers = [[0usize; FINGER_COUNT + 1]; FINGER_COUNT];
        for (label, pred) in labels.iter().zip(predictions) {
            confusion[label.class().index()][pred.class().index()] += 1;
            if let GraspState::BranchInterference(f) = label {
                let col = match pred {
                    GraspState::BranchInterference(g) => g.index(),
                    _ => FINGER_COUNT,
                };
                branch_fingers[f.index()][col] += 1;
            }
        }
        let row_sum = |c: usize| confusion[c].iter().sum::<usize>();
        let per_class_accuracy = std::array::from_fn(|c| ratio(confusion[c][c], row_sum(c)));
        let branch_total: usize = branch_fingers.iter().flatten().sum();
        let localized: usize = (0..FINGER_COUNT).map(|f| branch_fingers[f][f]).sum();
        let diagonal: usize = (0..4).map(|c| confusion[c][c]).sum();
        Ok(EvaluationReport {
            dataset_digest: digest.to_string(),
            confusion,
            branch_fingers,
            per_class_accuracy,
            localization_accuracy: ratio(localized, branch_total),
            overall_accuracy: ratio(diagonal, labels.len()),
        })
    }

    pub fn class_counts(&self) -> [usize; 4] {
        self.confusion.map(|row| row.iter().sum())
    }

    pub fn total(&self) -> usize {
        self.class_counts().iter().sum()
    }

    /// Accuracy as reported per class, with branch counted only on an exact
    /// finger match.
    pub fn reported_accuracy(&self) -> [f64; 4] {
        let mut acc = self.per_class_accuracy;
        acc[GraspClass::Branch.index()] = self.localization_accuracy;
        acc
    }

    /// `key=value` lines for scripts.
    pub fn to_machine_text(&self) -> String {
        let mut s = String::new();
        let w = &mut s;
        let _ = writeln!(w, "dataset_digest={}", self.dataset_digest);
        let _ = writeln!(w, "recordings={}", self.total());
        for (i, truth) in GraspClass::ALL.iter().enumerate() {
            for (j, pred) in GraspClass::ALL.iter().enumerate() {
                let _ = writeln!(w, "confusion.{}.{}={}", truth.name(), pred.name(), self.confusion[i][j]);
            }
        }
        for f in 0..FINGER_COUNT {
            for g in 0..=FINGER_COUNT {
                let col = if g == FINGER_COUNT { "none".to_string() } else { g.to_string() };
                let _ = writeln!(w, "branch_finger.{f}.{col}={}", self.branch_fingers[f][g]);
            }
        }
        for (c, class) in GraspClass::ALL.iter().enumerate() {
            let _ = writeln!(w, "accuracy.{}={:.6}", class.name(), self.per_class_accuracy[c]);
        }
        let _ = writeln!(w, "localization_accuracy={:.6}", self.localization_accuracy);
        let _ = writeln!(w, "overall_accuracy={:.6}", self.overall_accuracy);
        for (c, class) in GraspClass::ALL.iter().enumerate() {
            let _ = writeln!(w, "reference.{}={:.3}", class.name(), REFERENCE_ACCURACY[c]);
        }
        s
    }
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dataset {}  ({} recordings)", self.dataset_digest, self.total())?;
        writeln!(f)?;
        writeln!(f, "confusion (rows: label, columns: prediction)")?;
        write!(f, "{:>12}", "")?;
        for c in GraspClass::ALL {
            write!(f, "{:>12}", c.name())?;
        }
        writeln!(f)?;
        for (i, c) in GraspClass::ALL.iter().enumerate() {
            write!(f, "{:>12}", c.name())?;
            for n in self.confusion[i] {
                write!(f, "{n:>12}")?;
            }
            writeln!(f)?;
        }
        writeln!(f)?;
        writeln!(f, "branch localization (rows: labelled finger, columns: predicted finger)")?;
        write!(f, "{:>12}", "")?;
        for g in 0..FINGER_COUNT {
            write!(f, "{g:>6}")?;
        }
        writeln!(f, "{:>8}", "other")?;
        for (i, row) in self.branch_fingers.iter().enumerate() {
            write!(f, "{:>12}", format!("finger {i}"))?;
            for n in &row[..FINGER_COUNT] {
                write!(f, "{n:>6}")?;
            }
            writeln!(f, "{:>8}", row[FINGER_COUNT])?;
        }
        writeln!(f)?;
        writeln!(f, "{:>12}{:>12}{:>12}{:>12}", "class", "count", "accuracy", "reference")?;
        let counts = self.class_counts();
        let reported = self.reported_accuracy();
        for (c, class) in GraspClass::ALL.iter().enumerate() {
            writeln!(
                f,
                "{:>12}{:>12}{:>11.1}%{:>11.1}%",
                class.name(),
                counts[c],
                100.0 * reported[c],
                100.0 * REFERENCE_ACCURACY[c]
            )?;
        }
        writeln!(f, "{:>12}{:>12}{:>11.1}%", "overall", self.total(), 100.0 * self.overall_accuracy)?;
        writeln!(f)?;
        writeln!(f, "branch accuracy counts an exact finger match only")?;
        writeln!(
            f,
            "reference (conventional rule method): {:.1} / {:.1} / {:.1} / {:.1}",
            100.0 * REFERENCE_ACCURACY[0],
            100.0 * REFERENCE_ACCURACY[1],
            100.0 * REFERENCE_ACCURACY[2],
            100.0 * REFERENCE_ACCURACY[3]
        )
    }
}

/// Dataset ids and labels in manifest order.
pub fn dataset_labels<T>(dataset: &Dataset<T>) -> Result<(Vec<usize>, Vec<GraspState>)>
where
    T: Scalar,
{
    let ids: Vec<usize> = dataset.manifest.recordings.iter().map(|e| e.id).collect();
    let labels = dataset
        .recordings
        .iter()
        .zip(&ids)
        .map(|(r, id)| {
            r.label()
                .ok_or_else(|| Error::Format(format!("recording {id} has no label")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((ids, labels))
}

/// Scores external predictions against a labelled dataset.
pub fn evaluate<T: Scalar>(dataset: &Dataset<T>, predictions: &[Prediction]) -> Result<EvaluationReport> {
    let (ids, labels) = dataset_labels(dataset)?;
    let predicted = reconcile(&ids, predictions)?;
    EvaluationReport::from_pairs(&labels, &predicted, &dataset.manifest.digest())
}

/// Rule-estimator predictions, one per recording, with ids taken from
/// their position.
pub fn predict_recordings<T: Scalar>(
    recordings: &[GraspRecording<T>],
    cfg: &EstimatorConfig<T>,
) -> Result<Vec<Prediction>> {
    cfg.validate()?;
    let pipeline = cfg.pipeline_config();
    recordings
        .par_iter()
        .enumerate()
        .map(|(id, r)| {
            let features = extract_features(r, &pipeline)?;
            Ok(Prediction {
                id,
                state: classify(&features, cfg)?,
            })
        })
        .collect()
}

/// Rule-estimator predictions for a dataset, keyed by manifest id.
pub fn predict_dataset<T: Scalar>(dataset: &Dataset<T>, cfg: &EstimatorConfig<T>) -> Result<Vec<Prediction>> {
    let mut preds = predict_recordings(&dataset.recordings, cfg)?;
    for (p, entry) in preds.iter_mut().zip(&dataset.manifest.recordings) {
        p.id = entry.id;
    }
    Ok(preds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn f(i: usize) -> Finger {
        Finger::ALL[i]
    }

    #[test]
    fn parses_all_spellings() {
        let text = "# header\n0, null\n1, branch, 2\n\n2, obstructed:1  # trailing\n3,GOOD\n";
        let p = parse_predictions(text).unwrap();
        let states: Vec<GraspState> = p.iter().map(|p| p.state).collect();
        assert_eq!(
            states,
            vec![
                GraspState::Null,
                GraspState::BranchInterference(f(2)),
                GraspState::Obstructed(f(1)),
                GraspState::Good
            ]
        );
        assert_eq!(p.iter().map(|p| p.id).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn rejects_malformed_lines() {
        for bad in ["x, good", "1", "1, good, 2", "1, branch", "1, branch, 7", "1, sideways", "1, a, b, c"] {
            let err = parse_predictions(bad).unwrap_err();
            assert!(matches!(err, Error::Format(_)), "{bad}: {err}");
        }
    }

    #[test]
    fn format_parse_round_trip() {
        let preds = vec![
            Prediction { id: 4, state: GraspState::Obstructed(f(3)) },
            Prediction { id: 9, state: GraspState::Good },
            Prediction { id: 1, state: GraspState::BranchInterference(f(0)) },
        ];
        assert_eq!(parse_predictions(&format_predictions(&preds)).unwrap(), preds);
    }

    #[test]
    fn reconciliation_lists_every_problem() {
        let preds: Vec<Prediction> = [0, 1, 1, 5, 7]
            .iter()
            .map(|&id| Prediction { id, state: GraspState::Good })
            .collect();
        match reconcile(&[0, 1, 2, 3], &preds).unwrap_err() {
            Error::Reconciliation { missing, extra, duplicate } => {
                assert_eq!(missing, vec![2, 3]);
                assert_eq!(extra, vec![5, 7]);
                assert_eq!(duplicate, vec![1]);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn reconcile_orders_by_dataset_ids() {
        let preds = vec![
            Prediction { id: 2, state: GraspState::Null },
            Prediction { id: 0, state: GraspState::Good },
        ];
        assert_eq!(reconcile(&[0, 2], &preds).unwrap(), vec![GraspState::Good, GraspState::Null]);
    }

    fn balanced_labels(per_class: usize) -> Vec<GraspState> {
        (0..per_class)
            .flat_map(|i| {
                [
                    GraspState::Null,
                    GraspState::Obstructed(f(i % 4)),
                    GraspState::Good,
                    GraspState::BranchInterference(f(i % 4)),
                ]
            })
            .collect()
    }

    #[test]
    fn perfect_predictions_score_one() {
        let labels = balanced_labels(8);
        let r = EvaluationReport::from_pairs(&labels, &labels, "crc32:0").unwrap();
        assert_eq!(r.per_class_accuracy, [1.0; 4]);
        assert_eq!(r.localization_accuracy, 1.0);
        assert_eq!(r.overall_accuracy, 1.0);
        assert_eq!(r.class_counts(), [8; 4]);
    }

    #[test]
    fn wrong_finger_is_a_class_hit_but_a_localization_miss() {
        let labels = vec![GraspState::BranchInterference(f(1)), GraspState::BranchInterference(f(2))];
        let preds = vec![GraspState::BranchInterference(f(3)), GraspState::Good];
        let r = EvaluationReport::from_pairs(&labels, &preds, "d").unwrap();
        assert_eq!(r.per_class_accuracy[GraspClass::Branch.index()], 0.5);
        assert_eq!(r.localization_accuracy, 0.0);
        assert_eq!(r.branch_fingers[1][3], 1);
        assert_eq!(r.branch_fingers[2][FINGER_COUNT], 1);
    }

    fn random_state(rng: &mut ChaCha8Rng) -> GraspState {
        let finger = f(rng.random_range(0..4));
        match rng.random_range(0..4) {
            0 => GraspState::Null,
            1 => GraspState::Obstructed(finger),
            2 => GraspState::Good,
            _ => GraspState::BranchInterference(finger),
        }
    }

    #[test]
    fn uniform_random_predictions_score_a_quarter() {
        let labels = balanced_labels(25);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut sum = 0.0;
        let mut rows_ok = true;
        for _ in 0..1000 {
            let preds: Vec<GraspState> = labels.iter().map(|_| random_state(&mut rng)).collect();
            let r = EvaluationReport::from_pairs(&labels, &preds, "d").unwrap();
            rows_ok &= r.class_counts() == [25; 4];
            sum += r.overall_accuracy;
        }
        let mean = sum / 1000.0;
        assert!(rows_ok);
        assert!((mean - 0.25).abs() <= 0.05, "mean accuracy {mean}");
    }

    #[test]
    fn report_text_is_deterministic_and_carries_reference() {
        let labels = balanced_labels(3);
        let r = EvaluationReport::from_pairs(&labels, &labels, "crc32:deadbeef").unwrap();
        let table = r.to_string();
        assert_eq!(table, r.clone().to_string());
        assert!(table.contains("96.6 / 88.5 / 52.1 / 75.0"));
        let machine = r.to_machine_text();
        assert!(machine.contains("dataset_digest=crc32:deadbeef\n"));
        assert!(machine.contains("confusion.good.good=3\n"));
        assert!(machine.contains("accuracy.null=1.000000\n"));
    }
}
