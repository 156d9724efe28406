use super::AcquisitionWeights;
use crate::archive::LineageTree;
use crate::error::Result;

/// Discounted top-K descendant gain of node `i`: the mean of the K largest
/// values of `gamma^d * tanh((U_c - U_i) / beta)` over its descendants `c`
/// at relative depth `d`. Fewer than K descendants uses all of them; a
/// leaf scores 0.
pub fn discounted_topk_gain_at(tree: &LineageTree, i: usize, w: &AcquisitionWeights) -> f64 {
    let base = tree.nodes()[i].utility;
    let mut gains: Vec<f64> = tree
        .descendants(i)
        .into_iter()
        .map(|(c, d)| w.gain_gamma.powi(d as i32) * ((tree.nodes()[c].utility - base) / w.gain_beta).tanh())
        .collect();
    if gains.is_empty() {
        return 0.0;
    }
    gains.sort_by(|a, b| b.total_cmp(a));
    let k = w.gain_k.min(gains.len());
    gains[..k].iter().sum::<f64>() / k as f64
}

/// [`discounted_topk_gain_at`] addressed by node id or label.
pub fn discounted_topk_gain(tree: &LineageTree, node: &str, w: &AcquisitionWeights) -> Result<f64> {
    Ok(discounted_topk_gain_at(tree, tree.resolve(node)?, w))
}
