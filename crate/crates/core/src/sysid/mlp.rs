use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affine map of one signal into the network's working range,
/// `scaled = (x - offset) * gain`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub offset: f64,
    pub gain: f64,
}

impl Scaling {
    pub const IDENTITY: Scaling = Scaling {
        offset: 0.0,
        gain: 1.0,
    };

    /// Maps `[min, max]` onto `[-1, 1]`. A constant signal keeps unit gain.
    pub fn from_range(min: f64, max: f64) -> Self {
        if max > min {
            Scaling {
                offset: 0.5 * (min + max),
                gain: 2.0 / (max - min),
            }
        } else {
            Scaling {
                offset: min,
                gain: 1.0,
            }
        }
    }

    /// Fits one scaling per column of `m`.
    pub fn fit_columns(m: &DMatrix<f64>) -> Vec<Scaling> {
        m.column_iter()
            .map(|c| Scaling::from_range(c.min(), c.max()))
            .collect()
    }

    pub fn scale(&self, x: f64) -> f64 {
        (x - self.offset) * self.gain
    }

    pub fn unscale(&self, y: f64) -> f64 {
        y / self.gain + self.offset
    }
}

/// Three-layer perceptron: `tanh` hidden layer, linear output layer.
///
/// Weight matrices carry the bias in their last column.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpRegressor {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
    /// `n_hidden x (n_in + 1)`
    pub hidden_weights: DMatrix<f64>,
    /// `n_out x (n_hidden + 1)`
    pub output_weights: DMatrix<f64>,
    pub input_scaling: Vec<Scaling>,
    pub output_scaling: Vec<Scaling>,
}

impl MlpRegressor {
    /// Network with all weights zero and identity scaling.
    pub fn zeros(n_in: usize, n_hidden: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_hidden,
            n_out,
            hidden_weights: DMatrix::zeros(n_hidden, n_in + 1),
            output_weights: DMatrix::zeros(n_out, n_hidden + 1),
            input_scaling: vec![Scaling::IDENTITY; n_in],
            output_scaling: vec![Scaling::IDENTITY; n_out],
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_hidden * (self.n_in + 1) + self.n_out * (self.n_hidden + 1)
    }

    /// Flattens the weights: hidden rows first, then output rows.
    pub fn params(&self) -> DVector<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for r in self.hidden_weights.row_iter() {
            p.extend(r.iter());
        }
        for r in self.output_weights.row_iter() {
            p.extend(r.iter());
        }
        DVector::from_vec(p)
    }

    pub fn set_params(&mut self, p: &DVector<f64>) {
        let nh_cols = self.n_in + 1;
        let split = self.n_hidden * nh_cols;
        self.hidden_weights = DMatrix::from_row_slice(self.n_hidden, nh_cols, &p.as_slice()[..split]);
        self.output_weights =
            DMatrix::from_row_slice(self.n_out, self.n_hidden + 1, &p.as_slice()[split..]);
    }

    pub(crate) fn scale_inputs(&self, inputs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = inputs.clone();
        for (mut c, s) in x.column_iter_mut().zip(&self.input_scaling) {
            c.apply(|v| *v = s.scale(*v));
        }
        x
    }

    /// Hidden activations `N x n_hidden` for already scaled inputs.
    pub(crate) fn hidden(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let w = self.hidden_weights.columns(0, self.n_in);
        let b = self.hidden_weights.column(self.n_in);
        let mut h = x * w.transpose();
        for mut row in h.row_iter_mut() {
            row += b.transpose();
        }
        h.apply(|v| *v = v.tanh());
        h
    }

    /// Network outputs in scaled units given hidden activations.
    pub(crate) fn output_scaled(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        let w = self.output_weights.columns(0, self.n_hidden);
        let b = self.output_weights.column(self.n_hidden);
        let mut y = h * w.transpose();
        for mut row in y.row_iter_mut() {
            row += b.transpose();
        }
        y
    }

    fn check_width(&self, inputs: &DMatrix<f64>) -> Result<()> {
        if inputs.ncols() != self.n_in {
            return Err(Error::Shape(format!(
                "model expects {} input columns, got {}",
                self.n_in,
                inputs.ncols()
            )));
        }
        Ok(())
    }

    /// Raw network outputs before output unscaling (`N x n_out`).
    pub fn predict_scaled(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_width(inputs)?;
        let x = self.scale_inputs(inputs);
        Ok(self.output_scaled(&self.hidden(&x)))
    }

    /// Predictions in original units, one row per input row.
    pub fn predict(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut y = self.predict_scaled(inputs)?;
        for (mut c, s) in y.column_iter_mut().zip(&self.output_scaling) {
            c.apply(|v| *v = s.unscale(*v));
        }
        Ok(y)
    }

    /// Jacobian of the unscaled outputs with respect to the raw inputs at `x`
    /// (`n_out x n_in`).
    pub fn input_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        if x.len() != self.n_in {
            return Err(Error::Shape(format!("expected {} inputs, got {}", self.n_in, x.len())));
        }
        let xs = DVector::from_iterator(
            self.n_in,
            x.iter().zip(&self.input_scaling).map(|(v, s)| s.scale(*v)),
        );
        let pre = self.hidden_weights.columns(0, self.n_in) * &xs + self.hidden_weights.column(self.n_in);
        let slope = pre.map(|a| 1.0 - a.tanh().powi(2));
        let mut jac = DMatrix::zeros(self.n_out, self.n_in);
        for o in 0..self.n_out {
            for i in 0..self.n_in {
                let mut d = 0.0;
                for j in 0..self.n_hidden {
                    d += self.output_weights[(o, j)] * slope[j] * self.hidden_weights[(j, i)];
                }
                jac[(o, i)] = d * self.input_scaling[i].gain / self.output_scaling[o].gain;
            }
        }
        Ok(jac)
    }

    /// Text form: header, one scaling row per input and output, then the
    /// hidden and output weight rows. Floats use shortest round-trip digits.
    pub fn to_text(&self) -> String {
        let mut s = format!("mlp v1 {} {} {}\n", self.n_in, self.n_hidden, self.n_out);
        for sc in &self.input_scaling {
            let _ = writeln!(s, "in {} {}", sc.offset, sc.gain);
        }
        for sc in &self.output_scaling {
            let _ = writeln!(s, "out {} {}", sc.offset, sc.gain);
        }
        for m in [&self.hidden_weights, &self.output_weights] {
            for r in m.row_iter() {
                let row: Vec<String> = r.iter().map(|v| v.to_string()).collect();
                s.push_str(&row.join(" "));
                s.push('\n');
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, reason: String| Error::Parse {
            path: "<model>".into(),
            line,
            reason,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty model text".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 5 || h[0] != "mlp" || h[1] != "v1" {
            return Err(bad(1, format!("bad header `{header}`")));
        }
        let dim = |k: usize| {
            h[k].parse::<usize>()
                .map_err(|_| bad(1, format!("bad dimension `{}`", h[k])))
        };
        let (n_in, n_hidden, n_out) = (dim(2)?, dim(3)?, dim(4)?);
        let mut model = MlpRegressor::zeros(n_in, n_hidden, n_out);

        let mut numbers = |expect_tag: Option<&str>, count: usize| -> Result<Vec<f64>> {
            let (i, line) = lines
                .next()
                .ok_or_else(|| bad(0, "unexpected end of model text".into()))?;
            let mut toks = line.split_whitespace();
            if let Some(tag) = expect_tag {
                if toks.next() != Some(tag) {
                    return Err(bad(i + 1, format!("expected `{tag}` row")));
                }
            }
            let vals = toks
                .map(|t| t.parse::<f64>().map_err(|_| bad(i + 1, format!("bad number `{t}`"))))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != count {
                return Err(bad(i + 1, format!("expected {count} values, found {}", vals.len())));
            }
            Ok(vals)
        };
        for k in 0..n_in {
            let v = numbers(Some("in"), 2)?;
            model.input_scaling[k] = Scaling { offset: v[0], gain: v[1] };
        }
        for k in 0..n_out {
            let v = numbers(Some("out"), 2)?;
            model.output_scaling[k] = Scaling { offset: v[0], gain: v[1] };
        }
        for j in 0..n_hidden {
            let v = numbers(None, n_in + 1)?;
            model.hidden_weights.row_mut(j).copy_from_slice(&v);
        }
        for o in 0..n_out {
            let v = numbers(None, n_hidden + 1)?;
            model.output_weights.row_mut(o).copy_from_slice(&v);
        }
        if model
            .input_scaling
            .iter()
            .chain(&model.output_scaling)
            .any(|s| s.gain == 0.0 || !s.gain.is_finite())
        {
            return Err(bad(0, "scaling gain must be finite and nonzero".into()));
        }
        Ok(model)
    }
}
