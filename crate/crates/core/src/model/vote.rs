use crate::autodiff::Tensor;
use crate::scalar::Scalar;

/// Row-wise softmax of an `n x K` logit matrix.
pub fn softmax_rows<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let mut p = logits.clone();
    for r in 0..p.rows() {
        let row = p.row_mut(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut z = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z = z + *v;
        }
        row.iter_mut().for_each(|v| *v = *v / z);
    }
    p
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Face labels from per-vertex logits: average the three vertex
/// probability rows, take the argmax, smallest class on ties.
pub fn face_label_vote<T: Scalar>(vertex_logits: &Tensor<T>, faces: &[[usize; 3]]) -> Vec<u32> {
    face_label_vote_probs(&softmax_rows(vertex_logits).cast::<f64>(), faces)
}

/// As [`face_label_vote`] but from probabilities.
pub fn face_label_vote_probs(probs: &Tensor<f64>, faces: &[[usize; 3]]) -> Vec<u32> {
    let k = probs.cols();
    let mut avg = vec![0.0; k];
    faces
        .iter()
        .map(|f| {
            for (c, a) in avg.iter_mut().enumerate() {
                *a = (probs.get(f[0], c) + probs.get(f[1], c) + probs.get(f[2], c)) / 3.0;
            }
            argmax(&avg) as u32
        })
        .collect()
}
