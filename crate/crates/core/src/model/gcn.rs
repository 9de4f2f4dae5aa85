//! Two-layer graph convolution: `X1 = relu(Â X0 W0)`, `X2 = relu(Â X1 W1)`.

use ndarray::Array2;

use super::params::GcnParams;

#[derive(Debug, Clone, PartialEq)]
pub struct GcnTrace {
    pub ax0: Array2<f64>,
    pub p1: Array2<f64>,
    pub x1: Array2<f64>,
    pub ax1: Array2<f64>,
    pub p2: Array2<f64>,
    pub x2: Array2<f64>,
}

fn relu(m: &Array2<f64>) -> Array2<f64> {
    m.mapv(|x| x.max(0.0))
}

/// `a_norm` must already include self-loops and degree normalization.
pub fn gcn_forward(a_norm: &Array2<f64>, x0: &Array2<f64>, p: &GcnParams) -> GcnTrace {
    let ax0 = a_norm.dot(x0);
    let p1 = ax0.dot(&p.w0);
    let x1 = relu(&p1);
    let ax1 = a_norm.dot(&x1);
    let p2 = ax1.dot(&p.w1);
    let x2 = relu(&p2);
    GcnTrace { ax0, p1, x1, ax1, p2, x2 }
}

/// Accumulates parameter gradients into `grad` given `d_x2 = dL/dX2`.
pub fn gcn_backward(a_norm: &Array2<f64>, t: &GcnTrace, p: &GcnParams, d_x2: &Array2<f64>, grad: &mut GcnParams) {
    let d_p2 = d_x2 * &t.p2.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
    grad.w1 += &t.ax1.t().dot(&d_p2);
    let d_ax1 = d_p2.dot(&p.w1.t());
    let d_x1 = a_norm.t().dot(&d_ax1);
    let d_p1 = d_x1 * &t.p1.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
    grad.w0 += &t.ax0.t().dot(&d_p1);
}
