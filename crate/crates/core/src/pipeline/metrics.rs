use serde::{Deserialize, Serialize};

/// Accuracy plus per-class IoU and Dice from a pooled confusion matrix
/// (`confusion[truth][predicted]`). Classes that never occur in truth or
/// prediction have no IoU/DSC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub iou: Vec<Option<f64>>,
    pub dsc: Vec<Option<f64>>,
    pub mean_iou: Option<f64>,
    pub confusion: Vec<Vec<u64>>,
    pub total: u64,
}

impl Metrics {
    pub fn from_pairs(num_classes: usize, pairs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut confusion = vec![vec![0u64; num_classes]; num_classes];
        for (truth, pred) in pairs {
            confusion[truth as usize][pred as usize] += 1;
        }
        Self::from_confusion(confusion)
    }

    pub fn from_confusion(confusion: Vec<Vec<u64>>) -> Self {
        let k = confusion.len();
        let total: u64 = confusion.iter().flatten().sum();
        let correct: u64 = (0..k).map(|c| confusion[c][c]).sum();
        let mut iou = Vec::with_capacity(k);
        let mut dsc = Vec::with_capacity(k);
        for c in 0..k {
            let tp = confusion[c][c];
            let fn_ = confusion[c].iter().sum::<u64>() - tp;
            let fp = (0..k).map(|r| confusion[r][c]).sum::<u64>() - tp;
            let union = tp + fp + fn_;
            if union == 0 {
                iou.push(None);
                dsc.push(None);
            } else {
                iou.push(Some(tp as f64 / union as f64));
                dsc.push(Some(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64));
            }
        }
        let present: Vec<f64> = iou.iter().flatten().copied().collect();
        Metrics {
            accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
            mean_iou: (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64),
            iou,
            dsc,
            confusion,
            total,
        }
    }
}
