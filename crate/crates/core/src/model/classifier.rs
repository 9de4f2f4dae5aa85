//! MLP head over `[D_G ; D_T]`: one rectified hidden layer, two logits,
//! softmax.

use ndarray::{concatenate, Array1, Axis};

use super::params::ClassifierParams;

/// Lower clamp on the probability inside the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierTrace {
    pub input: Array1<f64>,
    pub hidden_pre: Array1<f64>,
    pub hidden: Array1<f64>,
    pub logits: Array1<f64>,
    pub probabilities: Array1<f64>,
}

pub fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = logits.mapv(|z| (z - max).exp());
    let sum = e.sum();
    e / sum
}

pub fn classify(d_g: &Array1<f64>, d_t: &Array1<f64>, p: &ClassifierParams) -> ClassifierTrace {
    let input = concatenate(Axis(0), &[d_g.view(), d_t.view()]).expect("1-d vectors");
    let hidden_pre = input.dot(&p.w1) + &p.b1;
    let hidden = hidden_pre.mapv(|x| x.max(0.0));
    let logits = hidden.dot(&p.w2) + &p.b2;
    let probabilities = softmax(&logits);
    ClassifierTrace { input, hidden_pre, hidden, logits, probabilities }
}

/// `-ln(max(p[label], 1e-12))`
pub fn cross_entropy(probabilities: &Array1<f64>, label: u8) -> f64 {
    -probabilities[label as usize].max(PROB_FLOOR).ln()
}

/// Gradient of `weight * cross_entropy` with respect to the logits. Zero when
/// the clamp is active, matching the flat loss there.
pub fn cross_entropy_logit_grad(probabilities: &Array1<f64>, label: u8, weight: f64) -> Array1<f64> {
    if probabilities[label as usize] < PROB_FLOOR {
        return Array1::zeros(probabilities.len());
    }
    let mut g = probabilities * weight;
    g[label as usize] -= weight;
    g
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> ndarray::Array2<f64> {
    a.view().insert_axis(Axis(1)).dot(&b.view().insert_axis(Axis(0)))
}

/// Accumulates into `grad` and returns `dL/d[D_G ; D_T]`.
pub fn classifier_backward(
    t: &ClassifierTrace,
    p: &ClassifierParams,
    d_logits: &Array1<f64>,
    grad: &mut ClassifierParams,
) -> Array1<f64> {
    grad.w2 += &outer(&t.hidden, d_logits);
    grad.b2 += d_logits;
    let d_hidden = p.w2.dot(d_logits);
    let d_pre = d_hidden * &t.hidden_pre.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
    grad.w1 += &outer(&t.input, &d_pre);
    grad.b1 += &d_pre;
    p.w1.dot(&d_pre)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn zero_params_even_odds() {
        let p = ClassifierParams {
            w1: Array2::zeros((3, 2)),
            b1: Array1::zeros(2),
            w2: Array2::zeros((2, 2)),
            b2: Array1::zeros(2),
        };
        let t = classify(&array![1.0, 2.0], &array![3.0], &p);
        assert_eq!(t.probabilities, array![0.5, 0.5]);
    }

    #[test]
    fn crafted_mlp_by_hand() {
        let p = ClassifierParams {
            w1: array![[1.0, -1.0], [0.5, 2.0]],
            b1: array![0.0, 0.5],
            w2: array![[1.0, 0.0], [0.0, 1.0]],
            b2: array![0.0, -1.0],
        };
        // input [2, 1]: pre = [2.5, 0.5] -> relu same; logits = [2.5, -0.5]
        let t = classify(&array![2.0], &array![1.0], &p);
        assert_eq!(t.logits, array![2.5, -0.5]);
        let p1 = 1.0 / (1.0 + 3f64.exp());
        assert!((t.probabilities[1] - p1).abs() < 1e-15);
        assert!((t.probabilities.sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn loss_examples() {
        assert!((cross_entropy(&array![0.5, 0.5], 1) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(cross_entropy(&array![0.0, 1.0], 1), 0.0);
        assert!((cross_entropy(&array![0.9, 0.1], 1) - std::f64::consts::LN_10).abs() < 1e-12);
        assert!((cross_entropy(&array![1.0, 0.0], 1) - 27.631021115928547).abs() < 1e-9);
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&array![1000.0, -1000.0]);
        assert_eq!(p, array![1.0, 0.0]);
        assert_eq!(cross_entropy_logit_grad(&p, 1, 1.0), array![0.0, 0.0]);
    }
}
