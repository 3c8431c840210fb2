//! Canonicalized training view shared by all learners.

use crate::features::LabeledSample;

use super::LearnError;

/// Borrowed, canonically ordered training data.
///
/// Samples are reordered by (task_id, worker_id, as_of_day) before any
/// randomized draw, so fitted models depend only on the sample *set* and
/// the seed, never on input order.
pub(crate) struct TrainView<'a> {
    pub rows: Vec<&'a [f64]>,
    pub labels: Vec<u8>,
    pub width: usize,
    /// Columns whose training values are all 0 or 1.
    pub binary: Vec<bool>,
}

impl<'a> TrainView<'a> {
    pub fn new(samples: &'a [LabeledSample]) -> Result<Self, LearnError> {
        if samples.is_empty() {
            return Err(LearnError::EmptyTrainingSet);
        }
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.sort_by(|&a, &b| {
            let sa = &samples[a];
            let sb = &samples[b];
            (&sa.task_id, &sa.worker_id, sa.as_of_day).cmp(&(
                &sb.task_id,
                &sb.worker_id,
                sb.as_of_day,
            ))
        });

        let width = samples[0].features.values().len();
        let mut rows = Vec::with_capacity(samples.len());
        let mut labels = Vec::with_capacity(samples.len());
        for &i in &order {
            let sample = &samples[i];
            let values = sample.features.values();
            if values.len() != width {
                return Err(LearnError::ShapeMismatch {
                    expected: width,
                    found: values.len(),
                });
            }
            let label = sample.label.ok_or_else(|| LearnError::UnlabeledSample {
                worker_id: sample.worker_id.clone(),
                task_id: sample.task_id.clone(),
            })?;
            rows.push(values);
            labels.push(label.index() as u8);
        }

        let mut binary = vec![true; width];
        for row in &rows {
            for (flag, &v) in binary.iter_mut().zip(row.iter()) {
                if *flag && v != 0.0 && v != 1.0 {
                    *flag = false;
                }
            }
        }

        Ok(TrainView {
            rows,
            labels,
            width,
            binary,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn class_counts(&self) -> [u32; 3] {
        let mut counts = [0u32; 3];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}
