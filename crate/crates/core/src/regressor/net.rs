//! Highway MLP over a flat parameter vector with hand-written
//! backpropagation.
//!
//! Layout: `input_layers` tanh layers, a tanh projection to the trunk
//! width, `highway_layers` gated layers `y = g * tanh(W x + b) + (1 - g) * x`
//! with `g = logistic(W_g x + b_g)`, then one head per anchor of
//! `head_layers` layers (tanh hidden, linear output) emitting `dim`
//! coordinates and a weight logit.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenegen::Generator;

/// Weight logits are clamped to this magnitude so weights stay in (0, 1).
pub const LOGIT_LIMIT: f64 = 30.0;

/// Initial transform-gate bias; negative so gates start mostly closed.
pub const GATE_BIAS_INIT: f64 = -1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    /// Obstacle slots in the scene descriptor.
    pub max_obstacles: usize,
    pub dim: usize,
    pub anchors: usize,
    pub degree: usize,
    pub input_layers: usize,
    pub input_width: usize,
    pub highway_layers: usize,
    pub highway_width: usize,
    /// Layers per head, the linear output layer included.
    pub head_layers: usize,
    pub head_width: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig::for_generator(Generator::Simple2d)
    }
}

impl NetConfig {
    pub fn for_generator(generator: Generator) -> Self {
        let (anchors, degree) = generator.path_shape();
        NetConfig {
            max_obstacles: generator.max_obstacles(),
            dim: generator.dim(),
            anchors,
            degree,
            input_layers: 2,
            input_width: 128,
            highway_layers: 4,
            highway_width: 256,
            head_layers: 3,
            head_width: 128,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("anchors", self.anchors),
            ("degree", self.degree),
            ("input_layers", self.input_layers),
            ("input_width", self.input_width),
            ("highway_width", self.highway_width),
            ("head_layers", self.head_layers),
            ("head_width", self.head_width),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("net {name} must be positive")));
            }
        }
        Ok(())
    }

    /// Scene descriptor entries per obstacle: kind, center, sizes.
    pub fn obstacle_width(&self) -> usize {
        1 + 2 * self.dim
    }

    /// Descriptor followed by normalized start and goal.
    pub fn input_dim(&self) -> usize {
        self.max_obstacles * self.obstacle_width() + 2 * self.dim
    }

    /// Per-head outputs: anchor coordinates and one weight logit.
    pub fn head_outputs(&self) -> usize {
        self.dim + 1
    }
}

/// One affine layer: row-major `outputs x inputs` weights at `offset`,
/// followed by `outputs` biases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub offset: usize,
}

impl Dense {
    fn len(&self) -> usize {
        self.outputs * (self.inputs + 1)
    }

    fn bias_offset(&self) -> usize {
        self.offset + self.outputs * self.inputs
    }

    fn weights<'a>(&self, params: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((self.outputs, self.inputs), &params[self.offset..self.bias_offset()])
            .expect("layout matches parameter vector")
    }

    fn bias<'a>(&self, params: &'a [f64]) -> ArrayView1<'a, f64> {
        ArrayView1::from(&params[self.bias_offset()..self.offset + self.len()])
    }

    fn forward(&self, params: &[f64], x: &Array2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights(params).t());
        z += &self.bias(params);
        z
    }

    /// Accumulates weight and bias gradients for upstream `dz` at input `x`
    /// and returns the input gradient.
    fn backward(&self, params: &[f64], grad: &mut [f64], x: &Array2<f64>, dz: &Array2<f64>) -> Array2<f64> {
        let (w_end, end) = (self.bias_offset(), self.offset + self.len());
        {
            let mut gw = ArrayViewMut2::from_shape((self.outputs, self.inputs), &mut grad[self.offset..w_end])
                .expect("layout matches parameter vector");
            general_mat_mul(1.0, &dz.t(), x, 1.0, &mut gw);
        }
        for (g, d) in grad[w_end..end].iter_mut().zip(dz.sum_axis(Axis(0))) {
            *g += d;
        }
        dz.dot(&self.weights(params))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    /// Input layers followed by the projection to the trunk width.
    pub stem: Vec<Dense>,
    /// `(transform, gate)` per highway layer.
    pub highway: Vec<(Dense, Dense)>,
    pub heads: Vec<Vec<Dense>>,
    pub param_count: usize,
}

impl Layout {
    pub fn new(config: &NetConfig) -> Self {
        let mut offset = 0;
        let mut dense = |inputs, outputs| {
            let d = Dense {
                inputs,
                outputs,
                offset,
            };
            offset += d.len();
            d
        };
        let mut stem = Vec::new();
        let mut width = config.input_dim();
        for _ in 0..config.input_layers {
            stem.push(dense(width, config.input_width));
            width = config.input_width;
        }
        stem.push(dense(width, config.highway_width));
        let highway = (0..config.highway_layers)
            .map(|_| (dense(config.highway_width, config.highway_width), dense(config.highway_width, config.highway_width)))
            .collect();
        let heads = (0..config.anchors)
            .map(|_| {
                let mut w = config.highway_width;
                (0..config.head_layers)
                    .map(|k| {
                        let out = if k + 1 == config.head_layers {
                            config.head_outputs()
                        } else {
                            config.head_width
                        };
                        let d = dense(w, out);
                        w = out;
                        d
                    })
                    .collect()
            })
            .collect();
        Layout {
            stem,
            highway,
            heads,
            param_count: offset,
        }
    }

    /// Every layer with a descriptive name, in parameter order.
    pub fn named(&self) -> Vec<(String, Dense)> {
        let mut out = Vec::new();
        for (k, d) in self.stem.iter().enumerate() {
            let name = if k + 1 == self.stem.len() {
                "projection".to_string()
            } else {
                format!("input.{k}")
            };
            out.push((name, *d));
        }
        for (k, (t, g)) in self.highway.iter().enumerate() {
            out.push((format!("highway.{k}.transform"), *t));
            out.push((format!("highway.{k}.gate"), *g));
        }
        for (h, head) in self.heads.iter().enumerate() {
            for (k, d) in head.iter().enumerate() {
                out.push((format!("head.{h}.{k}"), *d));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNet {
    pub config: NetConfig,
    pub layout: Layout,
    pub params: Vec<f64>,
}

/// Activations kept for the backward pass.
pub(crate) struct Trace {
    input: Array2<f64>,
    stem: Vec<Array2<f64>>,
    /// `(x, h, g)` per highway layer.
    highway: Vec<(Array2<f64>, Array2<f64>, Array2<f64>)>,
    trunk: Array2<f64>,
    heads: Vec<Vec<Array2<f64>>>,
}

impl Trace {
    /// Raw outputs of head `h`: `batch x (dim + 1)`.
    pub(crate) fn head_output(&self, h: usize) -> &Array2<f64> {
        self.heads[h].last().expect("heads have at least one layer")
    }
}

impl MlpNet {
    /// All parameters zero.
    pub fn zeros(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let params = vec![0.0; layout.param_count];
        Ok(MlpNet {
            config,
            layout,
            params,
        })
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero, gate biases at
    /// [`GATE_BIAS_INIT`].
    pub fn init<R: Rng>(config: NetConfig, rng: &mut R) -> Result<Self> {
        let mut net = MlpNet::zeros(config)?;
        for (name, d) in net.layout.named() {
            let bound = 1.0 / (d.inputs as f64).sqrt();
            for w in &mut net.params[d.offset..d.bias_offset()] {
                *w = rng.gen_range(-bound..=bound);
            }
            if name.ends_with(".gate") {
                net.params[d.bias_offset()..d.offset + d.len()].fill(GATE_BIAS_INIT);
            }
        }
        Ok(net)
    }

    pub fn param_count(&self) -> usize {
        self.layout.param_count
    }

    pub(crate) fn forward(&self, input: Array2<f64>) -> Result<Trace> {
        if input.ncols() != self.config.input_dim() {
            return Err(Error::Config(format!(
                "network expects {} inputs, got {}",
                self.config.input_dim(),
                input.ncols()
            )));
        }
        let p = &self.params;
        let mut stem: Vec<Array2<f64>> = Vec::with_capacity(self.layout.stem.len());
        for d in &self.layout.stem {
            let x = stem.last().unwrap_or(&input);
            stem.push(d.forward(p, x).mapv_into(f64::tanh));
        }
        let mut x = stem.last().expect("stem has a projection").clone();
        let mut highway = Vec::with_capacity(self.layout.highway.len());
        for (t, g) in &self.layout.highway {
            let h = t.forward(p, &x).mapv_into(f64::tanh);
            let gate = g.forward(p, &x).mapv_into(crate::autodiff::logistic);
            let y = &gate * &h + &(1.0 - &gate) * &x;
            highway.push((x, h, gate));
            x = y;
        }
        let trunk = x;
        let heads = self
            .layout
            .heads
            .iter()
            .map(|head| {
                let mut acts: Vec<Array2<f64>> = Vec::with_capacity(head.len());
                for (k, d) in head.iter().enumerate() {
                    let z = d.forward(p, acts.last().unwrap_or(&trunk));
                    acts.push(if k + 1 == head.len() { z } else { z.mapv_into(f64::tanh) });
                }
                acts
            })
            .collect();
        Ok(Trace {
            input,
            stem,
            highway,
            trunk,
            heads,
        })
    }

    /// Parameter gradient given the gradient of a scalar with respect to
    /// each head's raw output.
    pub(crate) fn backward(&self, trace: &Trace, d_heads: &[Array2<f64>]) -> Vec<f64> {
        let p = &self.params;
        let mut grad = vec![0.0; self.params.len()];
        let mut d_trunk = Array2::<f64>::zeros(trace.trunk.raw_dim());
        for ((head, acts), d_out) in self.layout.heads.iter().zip(&trace.heads).zip(d_heads) {
            let mut d = d_out.clone();
            for k in (0..head.len()).rev() {
                if k + 1 != head.len() {
                    d = d * acts[k].mapv(|a| 1.0 - a * a);
                }
                let x = if k == 0 { &trace.trunk } else { &acts[k - 1] };
                d = head[k].backward(p, &mut grad, x, &d);
            }
            d_trunk += &d;
        }
        let mut d = d_trunk;
        for ((t, g), (x, h, gate)) in self.layout.highway.iter().zip(&trace.highway).rev() {
            let dh = &d * gate * h.mapv(|a| 1.0 - a * a);
            let dg = &d * &(h - x) * gate * &gate.mapv(|v| 1.0 - v);
            let mut dx = &d * &gate.mapv(|v| 1.0 - v);
            dx += &t.backward(p, &mut grad, x, &dh);
            dx += &g.backward(p, &mut grad, x, &dg);
            d = dx;
        }
        for k in (0..self.layout.stem.len()).rev() {
            d = d * trace.stem[k].mapv(|a| 1.0 - a * a);
            let x = if k == 0 { &trace.input } else { &trace.stem[k - 1] };
            d = self.layout.stem[k].backward(p, &mut grad, x, &d);
        }
        grad
    }

    /// Trunk output for a batch of projected representations.
    #[cfg(test)]
    pub(crate) fn trunk(&self, projected: &Array2<f64>) -> Array2<f64> {
        let mut x = projected.clone();
        for (t, g) in &self.layout.highway {
            let h = t.forward(&self.params, &x).mapv_into(f64::tanh);
            let gate = g.forward(&self.params, &x).mapv_into(crate::autodiff::logistic);
            x = &gate * &h + &(1.0 - &gate) * &x;
        }
        x
    }
}

/// Raw head output to anchor coordinate within `[mid - half, mid + half]`.
pub fn squash(o: f64, mid: f64, half: f64) -> f64 {
    mid + half * o.tanh()
}

pub fn clamp_logit(o: f64) -> f64 {
    o.clamp(-LOGIT_LIMIT, LOGIT_LIMIT)
}

pub(crate) fn rows(data: Vec<Vec<f64>>, width: usize) -> Array2<f64> {
    let n = data.len();
    let flat: Vec<f64> = data.into_iter().flatten().collect();
    Array2::from_shape_vec((n, width), flat).expect("rows have the input width")
}
