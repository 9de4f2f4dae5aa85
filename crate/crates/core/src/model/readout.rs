//! Attentive graph summation: `X_G = sigmoid(X2 Wg + bg) ⊙ leaky(X2 Wf + bf)`,
//! `D_G = mean_nodes(X_G) + max_nodes(X_G)`.

use ndarray::{Array1, Array2, Axis};

use super::params::ReadoutParams;

pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutTrace {
    pub gate_pre: Array2<f64>,
    pub gate: Array2<f64>,
    pub feat_pre: Array2<f64>,
    pub feat: Array2<f64>,
    pub xg: Array2<f64>,
    /// Row holding each column's maximum (first on ties).
    pub argmax: Vec<usize>,
    pub d_g: Array1<f64>,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

/// Column-wise max over rows with the winning row per column.
pub(crate) fn max_pool(m: &Array2<f64>) -> (Array1<f64>, Vec<usize>) {
    let mut best = m.row(0).to_owned();
    let mut arg = vec![0; m.ncols()];
    for (i, row) in m.rows().into_iter().enumerate().skip(1) {
        for (j, &x) in row.iter().enumerate() {
            if x > best[j] {
                best[j] = x;
                arg[j] = i;
            }
        }
    }
    (best, arg)
}

/// `x2` must have at least one row.
pub fn readout_forward(x2: &Array2<f64>, p: &ReadoutParams) -> ReadoutTrace {
    assert!(x2.nrows() > 0, "readout over an empty graph");
    let gate_pre = x2.dot(&p.gate_w) + &p.gate_b;
    let gate = gate_pre.mapv(sigmoid);
    let feat_pre = x2.dot(&p.feat_w) + &p.feat_b;
    let feat = feat_pre.mapv(leaky);
    let xg = &gate * &feat;
    let mean = xg.mean_axis(Axis(0)).expect("non-empty");
    let (max, argmax) = max_pool(&xg);
    let d_g = mean + max;
    ReadoutTrace { gate_pre, gate, feat_pre, feat, xg, argmax, d_g }
}

/// Accumulates into `grad` and returns `dL/dX2`.
pub fn readout_backward(
    x2: &Array2<f64>,
    t: &ReadoutTrace,
    p: &ReadoutParams,
    d_dg: &Array1<f64>,
    grad: &mut ReadoutParams,
) -> Array2<f64> {
    let n = x2.nrows() as f64;
    let mut d_xg = Array2::from_shape_fn(t.xg.dim(), |(_, j)| d_dg[j] / n);
    for (j, &i) in t.argmax.iter().enumerate() {
        d_xg[[i, j]] += d_dg[j];
    }
    let d_gate_pre = &d_xg * &t.feat * &t.gate.mapv(|s| s * (1.0 - s));
    let d_feat_pre = &d_xg * &t.gate * &t.feat_pre.mapv(|x| if x > 0.0 { 1.0 } else { LEAKY_SLOPE });
    grad.gate_w += &x2.t().dot(&d_gate_pre);
    grad.gate_b += &d_gate_pre.sum_axis(Axis(0));
    grad.feat_w += &x2.t().dot(&d_feat_pre);
    grad.feat_b += &d_feat_pre.sum_axis(Axis(0));
    d_gate_pre.dot(&p.gate_w.t()) + d_feat_pre.dot(&p.feat_w.t())
}
