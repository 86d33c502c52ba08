use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mann–Whitney AUC: `P(s⁺ > s⁻) + ½ P(s⁺ = s⁻)`, from midranks.
pub fn auc<F: Scalar>(scores: &[F], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: scores.len(),
            context: "auc scores",
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidData("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("no NaN"));
    // Twice the rank sum of positives keeps tie midranks integral.
    let mut twice_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Ranks start+1..=end, so twice the midrank is start + end + 1.
        let twice_mid = (start + end + 1) as u128;
        let pos = order[start..end].iter().filter(|&&i| labels[i]).count() as u128;
        twice_rank_sum += pos * twice_mid;
        start = end;
    }
    let (np, nn) = (n_pos as u128, n_neg as u128);
    let twice_u = twice_rank_sum - np * (np + 1);
    Ok(twice_u as f64 / (2 * np * nn) as f64)
}
