//! Independent reference computations, written from the formulas rather than
//! from the library code.

use sgqc::tensor::Tensor;

pub struct OracleMetrics {
    pub precision: [f64; 3],
    pub recall: [f64; 3],
    pub f1: [f64; 3],
    pub f1_weighted: f64,
}

/// Counts TP/FP/FN by scanning the sample pairs directly.
pub fn brute_force_metrics(truth: &[usize], pred: &[usize]) -> OracleMetrics {
    let mut out = OracleMetrics {
        precision: [0.0; 3],
        recall: [0.0; 3],
        f1: [0.0; 3],
        f1_weighted: 0.0,
    };
    for l in 0..3 {
        let mut tp = 0u32;
        let mut fp = 0u32;
        let mut fn_ = 0u32;
        for (&t, &p) in truth.iter().zip(pred) {
            match (t == l, p == l) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                _ => {}
            }
        }
        let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        out.precision[l] = p;
        out.recall[l] = r;
        out.f1[l] = f;
        let share = truth.iter().filter(|&&t| t == l).count() as f64 / truth.len().max(1) as f64;
        out.f1_weighted += f * share;
    }
    out
}

/// Reference Adam on one scalar.
pub struct ScalarAdam {
    pub w: f64,
    m: f64,
    v: f64,
    t: i32,
}

impl ScalarAdam {
    pub fn new(w: f64) -> Self {
        ScalarAdam { w, m: 0.0, v: 0.0, t: 0 }
    }

    pub fn step(&mut self, g: f64, lr: f64, b1: f64, b2: f64, eps: f64) {
        self.t += 1;
        self.m = b1 * self.m + (1.0 - b1) * g;
        self.v = b2 * self.v + (1.0 - b2) * g * g;
        let m_hat = self.m / (1.0 - b1.powi(self.t));
        let v_hat = self.v / (1.0 - b2.powi(self.t));
        self.w -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Area average by explicit 2-D overlap of every input pixel with every output cell.
///
/// Coordinates are scaled by `out·in` so all box edges are integers.
pub fn coverage_downsample(x: &Tensor, out_h: usize, out_w: usize) -> Tensor {
    let (h, w, _) = x.dims3().unwrap();
    let overlap = |a0: usize, a1: usize, b0: usize, b1: usize| a1.min(b1).saturating_sub(a0.max(b0));
    let mut y = Tensor::zeros(&[out_h, out_w, 1]);
    for oi in 0..out_h {
        for oj in 0..out_w {
            // output cell in scaled units: [oi·h, (oi+1)·h) × [oj·w, (oj+1)·w)
            let mut acc = 0.0;
            for i in 0..h {
                let ov_r = overlap(i * out_h, (i + 1) * out_h, oi * h, (oi + 1) * h);
                if ov_r == 0 {
                    continue;
                }
                for j in 0..w {
                    let ov_c = overlap(j * out_w, (j + 1) * out_w, oj * w, (oj + 1) * w);
                    acc += x.data()[i * w + j] * (ov_r * ov_c) as f64;
                }
            }
            y.data_mut()[oi * out_w + oj] = acc / (h * w) as f64;
        }
    }
    y
}
