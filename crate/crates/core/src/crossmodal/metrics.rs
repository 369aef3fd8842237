use num_rational::Ratio;

use super::ModelError;

/// Mann-Whitney AUC as an exact fraction: the share of (positive, negative)
/// pairs where the positive scores higher, ties counting one half.
pub fn auc<S: PartialOrd>(scores: &[S], labels: &[bool]) -> Result<Ratio<u64>, ModelError> {
    if scores.len() != labels.len() {
        return Err(ModelError::InvalidInput(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("comparable scores"));
    let positives = labels.iter().filter(|&&l| l).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(ModelError::SingleClass);
    }
    // walk tie groups in ascending order; `twice` counts half-wins as 1
    let mut twice: u64 = 0;
    let mut negatives_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]].partial_cmp(&scores[order[i]]) == Some(std::cmp::Ordering::Equal) {
            j += 1;
        }
        let group = &order[i..j];
        let pos = group.iter().filter(|&&k| labels[k]).count() as u64;
        let neg = group.len() as u64 - pos;
        twice += pos * (2 * negatives_below + neg);
        negatives_below += neg;
        i = j;
    }
    Ok(Ratio::new(twice, 2 * positives * negatives))
}

pub fn auc_f64<S: PartialOrd>(scores: &[S], labels: &[bool]) -> Result<f64, ModelError> {
    let r = auc(scores, labels)?;
    Ok(*r.numer() as f64 / *r.denom() as f64)
}
