//! Two-layer bidirectional LSTM with a per-step linear decoder and max-pool
//! over time.
//!
//! Per step, with `z = x W_ih + h_prev W_hh + b` split as `[i | f | g | o]`:
//! `c = σ(f) c_prev + σ(i) tanh(g)`, `h = σ(o) tanh(c)`.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::params::{LstmCellParams, SeqEncoderParams};
use super::readout::{max_pool, sigmoid};

/// One direction of one layer, indexed by time position (not processing
/// order).
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionTrace {
    /// Activated gates `[i | f | g | o]`, `T × 4H`.
    pub gates: Array2<f64>,
    pub cell: Array2<f64>,
    pub hidden: Array2<f64>,
    pub reverse: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeqTrace {
    /// Input of each layer: token vectors, then layer-0 outputs.
    pub inputs: [Array2<f64>; 2],
    pub directions: [[DirectionTrace; 2]; 2],
    /// Concatenated layer-1 outputs, `T × 2H`.
    pub top: Array2<f64>,
    pub decoded: Array2<f64>,
    pub argmax: Vec<usize>,
    pub d_t: Array1<f64>,
}

fn prev_step(t: usize, len: usize, reverse: bool) -> Option<usize> {
    match reverse {
        false if t > 0 => Some(t - 1),
        true if t + 1 < len => Some(t + 1),
        _ => None,
    }
}

fn order(len: usize, reverse: bool) -> Box<dyn Iterator<Item = usize>> {
    if reverse {
        Box::new((0..len).rev())
    } else {
        Box::new(0..len)
    }
}

pub fn direction_forward(input: &Array2<f64>, p: &LstmCellParams, reverse: bool) -> DirectionTrace {
    let len = input.nrows();
    let hs = p.w_hh.nrows();
    let zx = input.dot(&p.w_ih) + &p.b;
    let mut gates = Array2::zeros((len, 4 * hs));
    let mut cell = Array2::zeros((len, hs));
    let mut hidden = Array2::zeros((len, hs));
    for t in order(len, reverse) {
        let mut z = zx.row(t).to_owned();
        let c_prev = match prev_step(t, len, reverse) {
            Some(pt) => {
                z += &hidden.row(pt).dot(&p.w_hh);
                cell.row(pt).to_owned()
            }
            None => Array1::zeros(hs),
        };
        let mut g = gates.row_mut(t);
        for k in 0..4 * hs {
            g[k] = if (2 * hs..3 * hs).contains(&k) { z[k].tanh() } else { sigmoid(z[k]) };
        }
        for k in 0..hs {
            let c: f64 = g[hs + k] * c_prev[k] + g[k] * g[2 * hs + k];
            cell[[t, k]] = c;
            hidden[[t, k]] = g[3 * hs + k] * c.tanh();
        }
    }
    DirectionTrace { gates, cell, hidden, reverse }
}

/// Backpropagation through time. Accumulates into `grad` and returns
/// `dL/dinput` when `want_input` is set.
pub fn direction_backward(
    input: &Array2<f64>,
    t: &DirectionTrace,
    p: &LstmCellParams,
    d_hidden: ArrayView2<'_, f64>,
    grad: &mut LstmCellParams,
    want_input: bool,
) -> Option<Array2<f64>> {
    let len = input.nrows();
    let hs = p.w_hh.nrows();
    let mut d_z = Array2::zeros((len, 4 * hs));
    let mut h_prev = Array2::zeros((len, hs));
    let mut dh_next = Array1::<f64>::zeros(hs);
    let mut dc_next = Array1::<f64>::zeros(hs);
    let w_hh_t = p.w_hh.t();
    for step in order(len, t.reverse).collect::<Vec<_>>().into_iter().rev() {
        let prev = prev_step(step, len, t.reverse);
        let g = t.gates.row(step);
        let dh = &d_hidden.row(step) + &dh_next;
        let mut dz = d_z.row_mut(step);
        for k in 0..hs {
            let (i, f, gg, o) = (g[k], g[hs + k], g[2 * hs + k], g[3 * hs + k]);
            let tc = t.cell[[step, k]].tanh();
            let c_prev = prev.map_or(0.0, |pt| t.cell[[pt, k]]);
            let dc = dh[k] * o * (1.0 - tc * tc) + dc_next[k];
            dz[k] = dc * gg * i * (1.0 - i);
            dz[hs + k] = dc * c_prev * f * (1.0 - f);
            dz[2 * hs + k] = dc * i * (1.0 - gg * gg);
            dz[3 * hs + k] = dh[k] * tc * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        dh_next = dz.dot(&w_hh_t);
        if let Some(pt) = prev {
            h_prev.row_mut(step).assign(&t.hidden.row(pt));
        }
    }
    grad.w_ih += &input.t().dot(&d_z);
    grad.w_hh += &h_prev.t().dot(&d_z);
    grad.b += &d_z.sum_axis(Axis(0));
    want_input.then(|| d_z.dot(&p.w_ih.t()))
}

/// `tokens` is `T × d` with `T >= 1`.
pub fn seq_forward(tokens: &Array2<f64>, p: &SeqEncoderParams) -> SeqTrace {
    assert!(tokens.nrows() > 0, "sequence encoder needs at least one token");
    let run_layer = |input: &Array2<f64>, cells: &[LstmCellParams; 2]| {
        let f = direction_forward(input, &cells[0], false);
        let b = direction_forward(input, &cells[1], true);
        let out = ndarray::concatenate(Axis(1), &[f.hidden.view(), b.hidden.view()]).expect("same length");
        ([f, b], out)
    };
    let (dirs0, out0) = run_layer(tokens, &p.layers[0]);
    let (dirs1, top) = run_layer(&out0, &p.layers[1]);
    let decoded = top.dot(&p.dec_w) + &p.dec_b;
    let (d_t, argmax) = max_pool(&decoded);
    SeqTrace { inputs: [tokens.clone(), out0], directions: [dirs0, dirs1], top, decoded, argmax, d_t }
}

/// Accumulates all encoder gradients into `grad`. Token vectors are frozen.
pub fn seq_backward(t: &SeqTrace, p: &SeqEncoderParams, d_dt: &Array1<f64>, grad: &mut SeqEncoderParams) {
    let len = t.top.nrows();
    let mut d_dec = Array2::zeros((len, d_dt.len()));
    for (j, &row) in t.argmax.iter().enumerate() {
        d_dec[[row, j]] = d_dt[j];
    }
    grad.dec_w += &t.top.t().dot(&d_dec);
    grad.dec_b += &d_dec.sum_axis(Axis(0));
    let mut d_out = d_dec.dot(&p.dec_w.t());
    let hs = p.layers[0][0].w_hh.nrows();
    for layer in (0..2).rev() {
        let want_input = layer > 0;
        let mut d_in: Option<Array2<f64>> = None;
        for dir in 0..2 {
            let cols = d_out.slice(s![.., dir * hs..(dir + 1) * hs]);
            let [g_f, g_b] = &mut grad.layers[layer];
            let g = if dir == 0 { g_f } else { g_b };
            let di = direction_backward(
                &t.inputs[layer],
                &t.directions[layer][dir],
                &p.layers[layer][dir],
                cols,
                g,
                want_input,
            );
            if let Some(di) = di {
                d_in = Some(match d_in {
                    Some(acc) => acc + di,
                    None => di,
                });
            }
        }
        if let Some(d) = d_in {
            d_out = d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::{Dims, Params};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dims() -> Dims {
        Dims { input: 3, gcn_hidden: 2, seq_hidden: 2, seq_out: 3, cls_hidden: 2 }
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let p = Params::zeros(dims());
        let tokens = Array2::from_shape_fn((4, 3), |(i, j)| (i + j) as f64);
        let t = seq_forward(&tokens, &p.seq);
        assert!(t.top.iter().all(|&x| x == 0.0));
        assert!(t.d_t.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_step_pools_to_that_step() {
        let p = Params::init(dims(), 2);
        let tokens = Array2::from_shape_fn((1, 3), |(_, j)| 0.3 * j as f64 - 0.2);
        let t = seq_forward(&tokens, &p.seq);
        assert_eq!(t.d_t, t.decoded.row(0));
    }

    /// Unrolled scalar-loop recurrence, written independently of the
    /// vectorized path.
    fn oracle_cell(x: &[f64], h: &[f64], c: &[f64], p: &LstmCellParams) -> (Vec<f64>, Vec<f64>) {
        let hs = h.len();
        let mut z = vec![0.0; 4 * hs];
        for (k, zk) in z.iter_mut().enumerate() {
            let mut s = p.b[k];
            for (i, xi) in x.iter().enumerate() {
                s += xi * p.w_ih[[i, k]];
            }
            for (i, hi) in h.iter().enumerate() {
                s += hi * p.w_hh[[i, k]];
            }
            *zk = s;
        }
        let sg = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut c_new = vec![0.0; hs];
        let mut h_new = vec![0.0; hs];
        for k in 0..hs {
            c_new[k] = sg(z[hs + k]) * c[k] + sg(z[k]) * z[2 * hs + k].tanh();
            h_new[k] = sg(z[3 * hs + k]) * c_new[k].tanh();
        }
        (h_new, c_new)
    }

    fn oracle_direction(xs: &[Vec<f64>], p: &LstmCellParams, reverse: bool) -> Vec<Vec<f64>> {
        let hs = p.w_hh.nrows();
        let mut out = vec![vec![0.0; hs]; xs.len()];
        let (mut h, mut c) = (vec![0.0; hs], vec![0.0; hs]);
        let idx: Vec<usize> = if reverse { (0..xs.len()).rev().collect() } else { (0..xs.len()).collect() };
        for t in idx {
            let (hn, cn) = oracle_cell(&xs[t], &h, &c, p);
            out[t] = hn.clone();
            h = hn;
            c = cn;
        }
        out
    }

    #[test]
    fn matches_unrolled_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = Params::init(dims(), 5);
        let xs: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut layer_in = xs.clone();
        for layer in 0..2 {
            let f = oracle_direction(&layer_in, &p.seq.layers[layer][0], false);
            let b = oracle_direction(&layer_in, &p.seq.layers[layer][1], true);
            layer_in = f.iter().zip(&b).map(|(a, b)| a.iter().chain(b).copied().collect()).collect();
        }
        let mut expected = vec![f64::NEG_INFINITY; 3];
        for row in &layer_in {
            for (j, e) in expected.iter_mut().enumerate() {
                let mut y = p.seq.dec_b[j];
                for (i, v) in row.iter().enumerate() {
                    y += v * p.seq.dec_w[[i, j]];
                }
                *e = e.max(y);
            }
        }
        let tokens = Array2::from_shape_fn((3, 3), |(i, j)| xs[i][j]);
        let t = seq_forward(&tokens, &p.seq);
        for (a, b) in t.d_t.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}
