//! Moving-variance feature extraction over taxel streams.
//!
//! Every frame is flattened to a 384-vector, each taxel series is smoothed
//! with a trailing moving average (4 frames by default) and then turned into
//! a trailing population variance (8 frames by default). The per-taxel
//! variances form the 384×t matrix M₁; reducing M₁ over each finger's 96
//! taxels gives one variance series per finger, whose maximum and first
//! threshold crossing within the grasp phase drive the rule estimator.

mod spectrum;
mod window;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::TaxelFrame;
use crate::layout::{Finger, FingerLayout, FINGER_COUNT, FRAME_INTERVAL_MS, TAXEL_COUNT};
use crate::recording::GraspRecording;
use crate::scalar::Scalar;

pub use spectrum::{power_spectrum, SpectralBin};
pub use window::{moving_average, moving_variance, RollingMean, RollingVariance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig<T> {
    pub smoothing_window: usize,
    pub variance_window: usize,
    /// Per-finger variance level that marks contact onset.
    pub onset_threshold: T,
    pub frame_interval_ms: u64,
}

impl<T: Scalar> Default for PipelineConfig<T> {
    fn default() -> Self {
        PipelineConfig {
            smoothing_window: 4,
            variance_window: 8,
            onset_threshold: T::lit(crate::estimator::DEFAULT_ONSET_THRESHOLD),
            frame_interval_ms: FRAME_INTERVAL_MS,
        }
    }
}

impl<T: Scalar> PipelineConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.smoothing_window < 1 {
            return Err(Error::Config("smoothing_window must be >= 1".into()));
        }
        if self.variance_window < 2 {
            return Err(Error::Config("variance_window must be >= 2".into()));
        }
        if !(self.onset_threshold > T::zero()) {
            return Err(Error::Config("onset_threshold must be > 0".into()));
        }
        Ok(())
    }
}

/// A 384×t matrix stored column by column (one column per frame).
#[derive(Debug, Clone, PartialEq)]
pub struct TaxelMatrix<T> {
    data: Vec<T>,
    cols: usize,
}

impl<T: Scalar> TaxelMatrix<T> {
    pub fn zeros(cols: usize) -> Self {
        TaxelMatrix {
            data: vec![T::zero(); TAXEL_COUNT * cols],
            cols,
        }
    }

    fn with_capacity(cols: usize) -> Self {
        TaxelMatrix {
            data: Vec::with_capacity(TAXEL_COUNT * cols),
            cols: 0,
        }
    }

    pub fn rows(&self) -> usize {
        TAXEL_COUNT
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[col * TAXEL_COUNT + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[col * TAXEL_COUNT + row] = value;
    }

    pub fn column(&self, col: usize) -> &[T] {
        &self.data[col * TAXEL_COUNT..(col + 1) * TAXEL_COUNT]
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = T> + '_ {
        (0..self.cols).map(move |c| self.get(row, c))
    }

    fn push_column(&mut self, col: &[T]) {
        debug_assert_eq!(col.len(), TAXEL_COUNT);
        self.data.extend_from_slice(col);
        self.cols += 1;
    }
}

/// Stacks frames into the 384×t matrix: row `16·r + c` is taxel `(r, c)`,
/// column `t` is frame `t`.
pub fn reshape_stream<T: Scalar, F: AsRef<[T]>>(frames: &[F]) -> Result<TaxelMatrix<T>> {
    if frames.is_empty() {
        return Err(Error::Argument("cannot reshape an empty frame sequence".into()));
    }
    let mut m = TaxelMatrix::with_capacity(frames.len());
    for (t, f) in frames.iter().enumerate() {
        let values = f.as_ref();
        if values.len() != TAXEL_COUNT {
            return Err(Error::Structural(format!(
                "frame {t} has {} values, expected {TAXEL_COUNT}",
                values.len()
            )));
        }
        m.push_column(values);
    }
    Ok(m)
}

/// Inverse of [`reshape_stream`].
pub fn unreshape<T: Scalar>(m: &TaxelMatrix<T>, timestamps_ms: &[u64]) -> Result<Vec<TaxelFrame<T>>> {
    if timestamps_ms.len() != m.cols() {
        return Err(Error::Structural(format!(
            "{} timestamps for {} columns",
            timestamps_ms.len(),
            m.cols()
        )));
    }
    timestamps_ms
        .iter()
        .enumerate()
        .map(|(t, &ts)| TaxelFrame::new(ts, m.column(t).to_vec()))
        .collect()
}

impl<T> AsRef<[T]> for TaxelFrame<T>
where
    T: Scalar,
{
    fn as_ref(&self) -> &[T] {
        self.values()
    }
}

/// Max of M₁ over each finger's rows and the columns in `span`.
pub fn per_finger_max_variance<T: Scalar>(
    m1: &TaxelMatrix<T>,
    layout: &FingerLayout,
    span: Range<usize>,
) -> Result<[T; FINGER_COUNT]> {
    check_span(&span, m1.cols())?;
    let mut out = [T::zero(); FINGER_COUNT];
    for t in span {
        for (taxel, &v) in m1.column(t).iter().enumerate() {
            let f = layout.finger_of_taxel(taxel).index();
            out[f] = out[f].max(v);
        }
    }
    Ok(out)
}

/// First index where `series` exceeds `threshold`.
pub fn onset_time<T: Scalar>(series: &[T], threshold: T) -> Option<usize> {
    series.iter().position(|&v| v > threshold)
}

fn check_span(span: &Range<usize>, cols: usize) -> Result<()> {
    if span.is_empty() {
        return Err(Error::Argument(format!("empty phase range {span:?}")));
    }
    if span.end > cols {
        return Err(Error::Argument(format!(
            "phase range {span:?} exceeds {cols} frames"
        )));
    }
    Ok(())
}

/// Feature snapshot over an analysis span of a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineFeatures<T> {
    /// M₁ for every frame seen so far.
    pub variance: TaxelMatrix<T>,
    /// Per frame, the max variance over each finger's taxels.
    pub finger_series: [Vec<T>; FINGER_COUNT],
    /// Frames the reductions below cover.
    pub span: Range<usize>,
    pub per_finger_max: [T; FINGER_COUNT],
    /// Absolute frame index of the first threshold crossing inside `span`.
    pub onset_times: [Option<usize>; FINGER_COUNT],
}

impl<T: Scalar> PipelineFeatures<T> {
    pub fn frame_count(&self) -> usize {
        self.variance.cols()
    }

    /// Onsets recomputed for another threshold.
    pub fn onsets(&self, threshold: T) -> [Option<usize>; FINGER_COUNT] {
        std::array::from_fn(|f| {
            onset_time(&self.finger_series[f][self.span.clone()], threshold)
                .map(|i| i + self.span.start)
        })
    }

    /// Features for explicit reductions, without a variance matrix behind
    /// them. Each finger's series steps from 0 to its max at its onset, so
    /// [`onsets`](Self::onsets) reproduces `onset_times` for any threshold
    /// below the finger's max.
    pub fn from_reductions(
        per_finger_max: [T; FINGER_COUNT],
        onset_times: [Option<usize>; FINGER_COUNT],
        frames: usize,
    ) -> Self {
        let frames = onset_times.iter().flatten().map(|o| o + 1).fold(frames, usize::max);
        let finger_series = std::array::from_fn(|f| {
            (0..frames)
                .map(|t| match onset_times[f] {
                    Some(o) if t >= o => per_finger_max[f],
                    _ => T::zero(),
                })
                .collect()
        });
        PipelineFeatures {
            variance: TaxelMatrix::zeros(frames),
            finger_series,
            span: 0..frames,
            per_finger_max,
            onset_times,
        }
    }
}

/// Per-frame output of [`TactilePipeline::push`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameUpdate<T> {
    pub frame_index: usize,
    pub finger_max_variance: [T; FINGER_COUNT],
}

/// Single-owner streaming accumulator: one frame in, updated variances out.
#[derive(Debug, Clone)]
pub struct TactilePipeline<T> {
    cfg: PipelineConfig<T>,
    layout: FingerLayout,
    smooth: Vec<RollingMean<T>>,
    var: Vec<RollingVariance<T>>,
    m1: TaxelMatrix<T>,
    finger_series: [Vec<T>; FINGER_COUNT],
    scratch: Vec<T>,
}

impl<T: Scalar> TactilePipeline<T> {
    pub fn new(cfg: PipelineConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(TactilePipeline {
            smooth: (0..TAXEL_COUNT)
                .map(|_| RollingMean::new(cfg.smoothing_window))
                .collect::<Result<_>>()?,
            var: (0..TAXEL_COUNT)
                .map(|_| RollingVariance::new(cfg.variance_window))
                .collect::<Result<_>>()?,
            cfg,
            layout: FingerLayout,
            m1: TaxelMatrix::with_capacity(64),
            finger_series: Default::default(),
            scratch: vec![T::zero(); TAXEL_COUNT],
        })
    }

    pub fn config(&self) -> &PipelineConfig<T> {
        &self.cfg
    }

    pub fn frames_seen(&self) -> usize {
        self.m1.cols()
    }

    pub fn push(&mut self, frame: &TaxelFrame<T>) -> FrameUpdate<T> {
        let mut finger_max = [T::zero(); FINGER_COUNT];
        for (taxel, &x) in frame.values().iter().enumerate() {
            let smoothed = self.smooth[taxel].push(x);
            let v = self.var[taxel].push(smoothed);
            self.scratch[taxel] = v;
            let f = self.layout.finger_of_taxel(taxel).index();
            finger_max[f] = finger_max[f].max(v);
        }
        self.m1.push_column(&self.scratch);
        for (series, v) in self.finger_series.iter_mut().zip(finger_max) {
            series.push(v);
        }
        FrameUpdate {
            frame_index: self.m1.cols() - 1,
            finger_max_variance: finger_max,
        }
    }

    /// Snapshot of the features reduced over `span`.
    pub fn features(&self, span: Range<usize>) -> Result<PipelineFeatures<T>> {
        check_span(&span, self.m1.cols())?;
        let per_finger_max = std::array::from_fn(|f| {
            self.finger_series[f][span.clone()]
                .iter()
                .copied()
                .fold(T::zero(), T::max)
        });
        let mut features = PipelineFeatures {
            variance: self.m1.clone(),
            finger_series: self.finger_series.clone(),
            span,
            per_finger_max,
            onset_times: [None; FINGER_COUNT],
        };
        features.onset_times = features.onsets(self.cfg.onset_threshold);
        Ok(features)
    }

    pub fn reset(&mut self) {
        self.smooth.iter_mut().for_each(RollingMean::reset);
        self.var.iter_mut().for_each(RollingVariance::reset);
        self.m1 = TaxelMatrix::with_capacity(64);
        self.finger_series = Default::default();
    }
}

/// Runs a whole recording through a fresh pipeline and reduces over its
/// grasp phase.
pub fn extract_features<T: Scalar>(
    recording: &GraspRecording<T>,
    cfg: &PipelineConfig<T>,
) -> Result<PipelineFeatures<T>> {
    let mut pipeline = TactilePipeline::new(*cfg)?;
    let span = recording.phases().grasp_span();
    for frame in &recording.frames()[..span.end.max(1)] {
        pipeline.push(frame);
    }
    pipeline.features(span)
}

/// Finger whose variance series is largest over the span, ties to the lowest index.
pub fn finger_argmax<T: Scalar>(values: &[T; FINGER_COUNT]) -> Finger {
    let mut best = 0;
    for f in 1..FINGER_COUNT {
        if values[f] > values[best] {
            best = f;
        }
    }
    Finger::ALL[best]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::FRAME_COLS;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frames(n: usize, seed: u64) -> Vec<TaxelFrame<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|t| {
                let v = (0..TAXEL_COUNT).map(|_| rng.random::<f64>()).collect();
                TaxelFrame::new(t as u64 * 60, v).unwrap()
            })
            .collect()
    }

    #[test]
    fn single_constant_frame() {
        let f = TaxelFrame::filled(0, 0.5f64).unwrap();
        let m = reshape_stream(&[f]).unwrap();
        assert_eq!((m.rows(), m.cols()), (384, 1));
        assert!(m.row(17).all(|v| v == 0.5));
        assert!((0..384).all(|r| m.get(r, 0) == 0.5));
    }

    #[test]
    fn reshape_index_map() {
        let frames = random_frames(10, 1);
        let m = reshape_stream(&frames).unwrap();
        for (t, frame) in frames.iter().enumerate() {
            for r in 0..24 {
                for c in 0..FRAME_COLS {
                    assert_eq!(m.get(FRAME_COLS * r + c, t), frame.get(r, c));
                }
            }
        }
        let ts: Vec<u64> = frames.iter().map(|f| f.timestamp_ms()).collect();
        assert_eq!(unreshape(&m, &ts).unwrap(), frames);
    }

    #[test]
    fn reshape_rejects_bad_input() {
        assert!(reshape_stream::<f64, Vec<f64>>(&[]).is_err());
        let bad = vec![vec![0.0f64; 384], vec![0.0; 380]];
        assert!(matches!(reshape_stream(&bad), Err(Error::Structural(_))));
    }

    #[test]
    fn per_finger_max_examples() {
        let mut m = TaxelMatrix::<f64>::zeros(5);
        assert_eq!(per_finger_max_variance(&m, &FingerLayout, 0..5).unwrap(), [0.0; 4]);
        // taxel (3, 9) sits in finger 2
        m.set(3 * 16 + 9, 2, 0.9);
        assert_eq!(
            per_finger_max_variance(&m, &FingerLayout, 0..5).unwrap(),
            [0.0, 0.0, 0.9, 0.0]
        );
        assert_eq!(per_finger_max_variance(&m, &FingerLayout, 3..5).unwrap(), [0.0; 4]);
        assert!(per_finger_max_variance(&m, &FingerLayout, 2..2).is_err());
        assert!(per_finger_max_variance(&m, &FingerLayout, 0..6).is_err());
    }

    #[test]
    fn onset_examples() {
        let step: Vec<f64> = (0..20).map(|i| if i >= 10 { 1.0 } else { 0.0 }).collect();
        assert_eq!(onset_time(&step, 0.5), Some(10));
        assert_eq!(onset_time(&[0.0f64; 12], 0.5), None);
    }

    #[test]
    fn streaming_pipeline_matches_per_taxel_composition() {
        let frames = random_frames(30, 2);
        let cfg = PipelineConfig::<f64>::default();
        let mut p = TactilePipeline::new(cfg).unwrap();
        for f in &frames {
            p.push(f);
        }
        let feats = p.features(5..30).unwrap();
        let m = reshape_stream(&frames).unwrap();
        for taxel in [0usize, 77, 383] {
            let series: Vec<f64> = m.row(taxel).collect();
            let smoothed = moving_average(&series, 4).unwrap();
            let var = moving_variance(&smoothed, 8).unwrap();
            for t in 0..30 {
                assert!((feats.variance.get(taxel, t) - var[t]).abs() < 1e-12);
            }
        }
        let brute = per_finger_max_variance(&feats.variance, &FingerLayout, 5..30).unwrap();
        assert_eq!(feats.per_finger_max, brute);
    }

    #[test]
    fn reset_forgets_history() {
        let frames = random_frames(12, 4);
        let mut p = TactilePipeline::new(PipelineConfig::<f64>::default()).unwrap();
        frames.iter().for_each(|f| {
            p.push(f);
        });
        p.reset();
        let mut fresh = TactilePipeline::new(PipelineConfig::<f64>::default()).unwrap();
        for f in &frames[..3] {
            assert_eq!(p.push(f), fresh.push(f));
        }
    }

    #[test]
    fn invalid_config() {
        let cfg = PipelineConfig::<f64> {
            variance_window: 1,
            ..Default::default()
        };
        assert!(matches!(TactilePipeline::new(cfg), Err(Error::Config(_))));
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(finger_argmax(&[0.0, 0.0, 0.0, 1.0]).index(), 3);
        assert_eq!(finger_argmax(&[0.5f64; 4]).index(), 0);
    }
}
