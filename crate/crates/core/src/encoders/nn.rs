use nalgebra::{DMatrix, DMatrixView, DVector, DVectorView};

/// Smooth ramp `(x + sqrt(x^2 + 1) - 1) / 2`: zero at zero with slope 1/2,
/// tends to `x - 1/2` and `-1/2` away from it.
#[inline]
pub fn ramp(x: f64) -> f64 {
    0.5 * (x + (x * x + 1.0).sqrt() - 1.0)
}

#[inline]
pub fn ramp_grad(x: f64) -> f64 {
    0.5 * (1.0 + x / (x * x + 1.0).sqrt())
}

/// Affine layer stored in a flat parameter buffer. The weight block is
/// column-major `output x input`, followed by the bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Linear {
    pub offset: usize,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn weight_len(&self) -> usize {
        self.input * self.output
    }

    pub fn len(&self) -> usize {
        self.weight_len() + self.output
    }

    pub fn weight<'a>(&self, p: &'a [f64]) -> DMatrixView<'a, f64> {
        DMatrixView::from_slice(&p[self.offset..self.offset + self.weight_len()], self.output, self.input)
    }

    pub fn bias<'a>(&self, p: &'a [f64]) -> DVectorView<'a, f64> {
        let b = self.offset + self.weight_len();
        DVectorView::from_slice(&p[b..b + self.output], self.output)
    }

    pub fn forward(&self, p: &[f64], x: &DVector<f64>) -> DVector<f64> {
        self.weight(p) * x + self.bias(p)
    }

    /// Column-wise forward over a batch of inputs (`input x k`).
    pub fn forward_columns(&self, p: &[f64], x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = self.weight(p) * x;
        let b = self.bias(p);
        for mut col in y.column_iter_mut() {
            col += &b;
        }
        y
    }

    /// Accumulates parameter gradients for one input and returns `dL/dx`.
    pub fn backward(&self, p: &[f64], grad: &mut [f64], x: &[f64], dy: &[f64]) -> DVector<f64> {
        self.accumulate(grad, x, dy);
        self.weight(p).tr_mul(&DVectorView::from_slice(dy, self.output))
    }

    /// Parameter gradients only.
    pub fn accumulate(&self, grad: &mut [f64], x: &[f64], dy: &[f64]) {
        let (w, rest) = grad[self.offset..self.offset + self.len()].split_at_mut(self.weight_len());
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let col = &mut w[j * self.output..(j + 1) * self.output];
            for (g, &d) in col.iter_mut().zip(dy) {
                *g += d * xj;
            }
        }
        for (g, &d) in rest.iter_mut().zip(dy) {
            *g += d;
        }
    }
}

pub(crate) fn ramp_vec(x: &DVector<f64>) -> DVector<f64> {
    x.map(ramp)
}

/// `dy * ramp'(pre)` elementwise.
pub(crate) fn ramp_back(pre: &DVector<f64>, dy: &DVector<f64>) -> DVector<f64> {
    pre.zip_map(dy, |a, d| d * ramp_grad(a))
}

pub(crate) fn concat(parts: &[&[f64]]) -> DVector<f64> {
    let n = parts.iter().map(|p| p.len()).sum();
    let mut v = Vec::with_capacity(n);
    for p in parts {
        v.extend_from_slice(p);
    }
    DVector::from_vec(v)
}
