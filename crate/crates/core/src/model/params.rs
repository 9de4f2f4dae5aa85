use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Layer widths of the whole network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// Word / vertex feature width.
    pub input: usize,
    /// GCN hidden and output width.
    pub gcn_hidden: usize,
    /// LSTM hidden width per direction.
    pub seq_hidden: usize,
    /// Width of the sequence document vector.
    pub seq_out: usize,
    pub cls_hidden: usize,
}

impl Dims {
    pub fn is_valid(&self) -> bool {
        [self.input, self.gcn_hidden, self.seq_hidden, self.seq_out, self.cls_hidden].iter().all(|&d| d > 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub w0: Array2<f64>,
    pub w1: Array2<f64>,
}

/// `gate` is the sigmoid branch, `feat` the leaky-rectifier branch.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutParams {
    pub gate_w: Array2<f64>,
    pub gate_b: Array1<f64>,
    pub feat_w: Array2<f64>,
    pub feat_b: Array1<f64>,
}

/// Gate blocks are laid out `[input | forget | cell | output]` along the
/// column axis.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub w_ih: Array2<f64>,
    pub w_hh: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeqEncoderParams {
    /// `layers[l] = [forward, backward]`.
    pub layers: [[LstmCellParams; 2]; 2],
    pub dec_w: Array2<f64>,
    pub dec_b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Every trainable tensor. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub gcn: GcnParams,
    pub readout: ReadoutParams,
    pub seq: SeqEncoderParams,
    pub classifier: ClassifierParams,
}

const DIRECTIONS: [&str; 2] = ["fwd", "bwd"];

macro_rules! named_tensors {
    ($p:expr, $view:ident, $iter:ident) => {{
        let mut out = vec![
            ("gcn.w0".to_string(), $p.gcn.w0.$view().into_dyn()),
            ("gcn.w1".to_string(), $p.gcn.w1.$view().into_dyn()),
            ("readout.gate_w".to_string(), $p.readout.gate_w.$view().into_dyn()),
            ("readout.gate_b".to_string(), $p.readout.gate_b.$view().into_dyn()),
            ("readout.feat_w".to_string(), $p.readout.feat_w.$view().into_dyn()),
            ("readout.feat_b".to_string(), $p.readout.feat_b.$view().into_dyn()),
        ];
        for (l, layer) in $p.seq.layers.$iter().enumerate() {
            for (d, cell) in layer.$iter().enumerate() {
                let pre = format!("seq.l{l}.{}", DIRECTIONS[d]);
                out.push((format!("{pre}.w_ih"), cell.w_ih.$view().into_dyn()));
                out.push((format!("{pre}.w_hh"), cell.w_hh.$view().into_dyn()));
                out.push((format!("{pre}.b"), cell.b.$view().into_dyn()));
            }
        }
        out.push(("seq.dec_w".to_string(), $p.seq.dec_w.$view().into_dyn()));
        out.push(("seq.dec_b".to_string(), $p.seq.dec_b.$view().into_dyn()));
        out.push(("classifier.w1".to_string(), $p.classifier.w1.$view().into_dyn()));
        out.push(("classifier.b1".to_string(), $p.classifier.b1.$view().into_dyn()));
        out.push(("classifier.w2".to_string(), $p.classifier.w2.$view().into_dyn()));
        out.push(("classifier.b2".to_string(), $p.classifier.b2.$view().into_dyn()));
        out
    }};
}

impl Params {
    /// Builds every tensor with `fill(shape, fan_in)`.
    fn build(dims: Dims, mut fill: impl FnMut(&[usize], usize) -> Vec<f64>) -> Self {
        let mut mat = |r: usize, c: usize, fan_in: usize| {
            Array2::from_shape_vec((r, c), fill(&[r, c], fan_in)).expect("fill returns r*c values")
        };
        let (d, h, hs, ht, hc) = (dims.input, dims.gcn_hidden, dims.seq_hidden, dims.seq_out, dims.cls_hidden);
        let gcn = GcnParams { w0: mat(d, h, d), w1: mat(h, h, h) };
        let readout = ReadoutParams {
            gate_w: mat(h, h, h),
            gate_b: mat(1, h, h).into_shape_with_order(h).unwrap(),
            feat_w: mat(h, h, h),
            feat_b: mat(1, h, h).into_shape_with_order(h).unwrap(),
        };
        let mut cell = |input: usize| LstmCellParams {
            w_ih: mat(input, 4 * hs, input),
            w_hh: mat(hs, 4 * hs, hs),
            b: mat(1, 4 * hs, hs).into_shape_with_order(4 * hs).unwrap(),
        };
        let layers = [[cell(d), cell(d)], [cell(2 * hs), cell(2 * hs)]];
        let seq = SeqEncoderParams {
            layers,
            dec_w: mat(2 * hs, ht, 2 * hs),
            dec_b: mat(1, ht, 2 * hs).into_shape_with_order(ht).unwrap(),
        };
        let classifier = ClassifierParams {
            w1: mat(h + ht, hc, h + ht),
            b1: mat(1, hc, h + ht).into_shape_with_order(hc).unwrap(),
            w2: mat(hc, 2, hc),
            b2: mat(1, 2, hc).into_shape_with_order(2).unwrap(),
        };
        Params { gcn, readout, seq, classifier }
    }

    pub fn zeros(dims: Dims) -> Self {
        Self::build(dims, |shape, _| vec![0.0; shape.iter().product()])
    }

    /// Uniform in `±1/sqrt(fan_in)` from a seeded stream.
    pub fn init(dims: Dims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(dims, |shape, fan_in| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            (0..shape.iter().product()).map(|_| rng.gen_range(-bound..=bound)).collect()
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.map_inplace(|_| 0.0);
        z
    }

    pub fn named(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        named_tensors!(self, view, iter)
    }

    pub fn named_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        named_tensors!(self, view_mut, iter_mut)
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        self.named().into_iter().map(|(_, v)| v.to_slice().expect("parameters are contiguous")).collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.named_mut()
            .into_iter()
            .map(|(_, v)| v.into_slice().expect("parameters are contiguous"))
            .collect()
    }

    pub fn map_inplace(&mut self, mut f: impl FnMut(f64) -> f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|x| *x = f(*x));
        }
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &Params) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += alpha * y);
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.slices().iter().flat_map(|s| s.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }
}
