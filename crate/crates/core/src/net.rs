//! Fully connected feedforward nets with sigmoid (or identity) layers.
//!
//! Layers are numbered `1..=p` as in the sensitivity recursions; layer `0`
//! is the input. `W^k` has shape `(n_{k-1}, n_k)` so that the
//! pre-activation of layer `k` is `W^k' A^(k-1) + b^k`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::ScalingParams;
use crate::error::{Error, Result};

/// Half-width of the uniform initialization interval.
pub const INIT_HALF_WIDTH: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// First derivative written in terms of the activation value `a`.
    pub fn slope(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }

    /// Second derivative written in terms of the activation value `a`.
    pub fn curvature(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a) * (1.0 - 2.0 * a),
            Activation::Identity => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetArchitecture {
    layer_dims: Vec<usize>,
    activations: Vec<Activation>,
}

impl NetArchitecture {
    /// Sigmoid hidden layers and the given output activation.
    pub fn new(layer_dims: Vec<usize>, output: Activation) -> Result<Self> {
        let p = layer_dims.len().saturating_sub(1);
        let mut activations = vec![Activation::Sigmoid; p];
        if let Some(last) = activations.last_mut() {
            *last = output;
        }
        Self::with_activations(layer_dims, activations)
    }

    pub fn sigmoid(layer_dims: Vec<usize>) -> Result<Self> {
        Self::new(layer_dims, Activation::Sigmoid)
    }

    /// One activation per non-input layer.
    pub fn with_activations(layer_dims: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::InvalidArgument(
                "architecture needs an input and at least one further layer".into(),
            ));
        }
        if layer_dims.contains(&0) {
            return Err(Error::InvalidArgument("layer dimensions must be >= 1".into()));
        }
        if activations.len() != layer_dims.len() - 1 {
            return Err(Error::DimensionMismatch {
                what: "activation count",
                expected: layer_dims.len() - 1,
                got: activations.len(),
            });
        }
        Ok(Self {
            layer_dims,
            activations,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn inputs(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    /// Number of weight layers `p`.
    pub fn depth(&self) -> usize {
        self.layer_dims.len() - 1
    }

    /// Activation of layer `k`, `1 <= k <= p`.
    pub fn activation(&self, k: usize) -> Activation {
        self.activations[k - 1]
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn weight_count(&self) -> usize {
        self.layer_dims.windows(2).map(|w| w[0] * w[1]).sum()
    }

    pub fn bias_count(&self) -> usize {
        self.layer_dims[1..].iter().sum()
    }

    pub fn parameter_count(&self) -> usize {
        self.weight_count() + self.bias_count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardNet {
    architecture: NetArchitecture,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Outputs of every layer for one input; `layers[0]` is the input itself.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerActivations {
    pub layers: Vec<Array1<f64>>,
}

impl LayerActivations {
    pub fn output(&self) -> &Array1<f64> {
        self.layers.last().unwrap()
    }

    /// `A^(k)`.
    pub fn layer(&self, k: usize) -> &Array1<f64> {
        &self.layers[k]
    }
}

impl FeedforwardNet {
    pub fn new(
        architecture: NetArchitecture,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
    ) -> Result<Self> {
        let p = architecture.depth();
        if weights.len() != p || biases.len() != p {
            return Err(Error::DimensionMismatch {
                what: "layer count",
                expected: p,
                got: weights.len().min(biases.len()),
            });
        }
        let dims = architecture.dims();
        for k in 0..p {
            if weights[k].dim() != (dims[k], dims[k + 1]) {
                return Err(Error::InvalidArgument(format!(
                    "weight matrix {} has shape {:?}, expected {:?}",
                    k + 1,
                    weights[k].dim(),
                    (dims[k], dims[k + 1])
                )));
            }
            if biases[k].len() != dims[k + 1] {
                return Err(Error::DimensionMismatch {
                    what: "bias length",
                    expected: dims[k + 1],
                    got: biases[k].len(),
                });
            }
        }
        if weights
            .iter()
            .flat_map(|w| w.iter())
            .chain(biases.iter().flat_map(|b| b.iter()))
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument("net parameters must be finite".into()));
        }
        Ok(Self {
            architecture,
            weights,
            biases,
        })
    }

    /// All parameters zero.
    pub fn zeros(architecture: NetArchitecture) -> Self {
        let dims = architecture.dims().to_vec();
        let weights = dims.windows(2).map(|w| Array2::zeros((w[0], w[1]))).collect();
        let biases = dims[1..].iter().map(|&d| Array1::zeros(d)).collect();
        Self {
            architecture,
            weights,
            biases,
        }
    }

    /// I.i.d. uniform parameters on `[-0.7, 0.7]`, deterministic in `seed`.
    pub fn init_random(architecture: NetArchitecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::zeros(architecture);
        let params: Vec<f64> = (0..net.architecture.parameter_count())
            .map(|_| rng.random_range(-INIT_HALF_WIDTH..=INIT_HALF_WIDTH))
            .collect();
        net.set_parameters(&params);
        net
    }

    pub fn architecture(&self) -> &NetArchitecture {
        &self.architecture
    }

    pub fn depth(&self) -> usize {
        self.architecture.depth()
    }

    /// `W^k` for `1 <= k <= p`.
    pub fn weight(&self, k: usize) -> &Array2<f64> {
        &self.weights[k - 1]
    }

    /// `b^k` for `1 <= k <= p`.
    pub fn bias(&self, k: usize) -> &Array1<f64> {
        &self.biases[k - 1]
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    /// Flat parameter vector: per layer, weights row-major then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.architecture.parameter_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    /// Inverse of [`parameters`](Self::parameters). Panics on length mismatch.
    pub fn set_parameters(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.architecture.parameter_count());
        let mut it = params.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().for_each(|v| *v = it.next().unwrap());
            b.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.architecture.inputs() {
            return Err(Error::DimensionMismatch {
                what: "input dimension",
                expected: self.architecture.inputs(),
                got: len,
            });
        }
        Ok(())
    }

    /// `A^(k) = act_k(W^k' A^(k-1) + b^k)` for `k = 1..=p`.
    pub fn forward(&self, x: ArrayView1<f64>) -> Result<LayerActivations> {
        self.check_input(x.len())?;
        let mut layers = Vec::with_capacity(self.depth() + 1);
        layers.push(x.to_owned());
        for k in 1..=self.depth() {
            let act = self.architecture.activation(k);
            let z = self.weight(k).t().dot(&layers[k - 1]) + self.bias(k);
            layers.push(z.mapv(|v| act.apply(v)));
        }
        Ok(LayerActivations { layers })
    }

    /// Net output for one input.
    pub fn output(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        Ok(self.forward(x)?.layers.pop().unwrap())
    }

    /// Row-wise [`forward`](Self::forward); result is `T x n_p`.
    pub fn predict_series(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let mut out = Array2::zeros((x.nrows(), self.architecture.outputs()));
        for (t, row) in x.rows().into_iter().enumerate() {
            out.row_mut(t).assign(&self.output(row)?);
        }
        Ok(out)
    }
}

/// Scaling of the data a net was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingScaling {
    pub x: ScalingParams,
    pub y: ScalingParams,
}

/// JSON form of a net: architecture, row-major weights, biases and
/// provenance. Floats are written in shortest round-trip form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetDocument {
    pub architecture: NetArchitecture,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub scaling: Option<TrainingScaling>,
}

impl NetDocument {
    pub fn from_net(net: &FeedforwardNet, seed: Option<u64>, scaling: Option<TrainingScaling>) -> Self {
        Self {
            architecture: net.architecture.clone(),
            weights: net.weights.iter().map(|w| w.iter().copied().collect()).collect(),
            biases: net.biases.iter().map(|b| b.to_vec()).collect(),
            seed,
            scaling,
        }
    }

    pub fn to_net(&self) -> Result<FeedforwardNet> {
        let arch = NetArchitecture::with_activations(
            self.architecture.layer_dims.clone(),
            self.architecture.activations.clone(),
        )?;
        let dims = arch.dims();
        if self.weights.len() != arch.depth() {
            return Err(Error::DimensionMismatch {
                what: "weight layers",
                expected: arch.depth(),
                got: self.weights.len(),
            });
        }
        let weights = self
            .weights
            .iter()
            .enumerate()
            .map(|(k, w)| {
                Array2::from_shape_vec((dims[k], dims[k + 1]), w.clone())
                    .map_err(|e| Error::InvalidArgument(format!("weight layer {}: {e}", k + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        let biases = self.biases.iter().map(|b| Array1::from(b.clone())).collect();
        FeedforwardNet::new(arch, weights, biases)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    /// Toy net from the indeterminacy example: b1=-2.057, w1=5.654, b2=-1.951, w2=3.144.
    fn toy() -> FeedforwardNet {
        FeedforwardNet::new(
            NetArchitecture::sigmoid(vec![1, 1, 1]).unwrap(),
            vec![array![[5.654]], array![[3.144]]],
            vec![array![-2.057], array![-1.951]],
        )
        .unwrap()
    }

    #[test]
    fn same_seed_gives_identical_nets() {
        let arch = NetArchitecture::sigmoid(vec![3, 5, 1]).unwrap();
        let a = FeedforwardNet::init_random(arch.clone(), 7);
        let b = FeedforwardNet::init_random(arch.clone(), 7);
        assert_eq!(a, b);
        let c = FeedforwardNet::init_random(arch, 8);
        assert_ne!(a.parameters(), c.parameters());
    }

    #[test]
    fn init_stays_in_interval() {
        let net = FeedforwardNet::init_random(NetArchitecture::sigmoid(vec![4, 9, 3]).unwrap(), 3);
        assert!(net.parameters().iter().all(|v| v.abs() <= INIT_HALF_WIDTH));
    }

    #[test]
    fn parameter_counts() {
        let toy = NetArchitecture::sigmoid(vec![1, 1, 1]).unwrap();
        assert_eq!((toy.weight_count(), toy.bias_count()), (2, 2));
        let btc = NetArchitecture::sigmoid(vec![6, 100, 1]).unwrap();
        assert_eq!((btc.weight_count(), btc.bias_count()), (700, 101));
    }

    #[test]
    fn invalid_architectures() {
        assert!(NetArchitecture::sigmoid(vec![3]).is_err());
        assert!(NetArchitecture::sigmoid(vec![3, 0, 1]).is_err());
    }

    #[test]
    fn zero_net_outputs_half() {
        let net = FeedforwardNet::zeros(NetArchitecture::sigmoid(vec![3, 4, 2]).unwrap());
        let acts = net.forward(array![0.3, -1.0, 2.0].view()).unwrap();
        for k in 1..=2 {
            assert!(acts.layer(k).iter().all(|&v| v == 0.5));
        }
    }

    #[test]
    fn toy_net_at_zero() {
        // o = sigma(-1.951 + 3.144 * sigma(-2.057))
        let inner = 1.0 / (1.0 + 2.057f64.exp());
        let expected = 1.0 / (1.0 + (1.951 - 3.144 * inner).exp());
        let o = toy().output(array![0.0].view()).unwrap()[0];
        assert!((o - expected).abs() < 1e-15);
        assert!((o - 0.1687).abs() < 5e-5);
    }

    #[test]
    fn identity_output_with_zero_hidden_weights_returns_bias() {
        let arch = NetArchitecture::new(vec![2, 3, 1], Activation::Identity).unwrap();
        let mut net = FeedforwardNet::zeros(arch);
        let mut p = net.parameters();
        let last = p.len() - 1;
        p[last] = 0.42;
        net.set_parameters(&p);
        assert_eq!(net.output(array![1.0, 2.0].view()).unwrap()[0], 0.42);
    }

    #[test]
    fn forward_rejects_wrong_dimension() {
        assert!(matches!(
            toy().forward(array![1.0, 2.0].view()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(toy().predict_series(Array2::zeros((3, 2)).view()).is_err());
    }

    #[test]
    fn predict_series_matches_forward_loop() {
        let net = FeedforwardNet::init_random(NetArchitecture::sigmoid(vec![3, 6, 2]).unwrap(), 11);
        let x = Array2::from_shape_fn((9, 3), |(t, i)| ((t * 3 + i) as f64 * 0.37).sin());
        let batch = net.predict_series(x.view()).unwrap();
        for t in 0..9 {
            assert_eq!(batch.row(t), net.output(x.row(t)).unwrap());
        }
        // permuting rows permutes outputs
        let perm = [4, 0, 8, 2, 6, 1, 7, 3, 5];
        let xp = x.select(ndarray::Axis(0), &perm);
        let bp = net.predict_series(xp.view()).unwrap();
        for (r, &src) in perm.iter().enumerate() {
            assert_eq!(bp.row(r), batch.row(src));
        }
    }

    #[test]
    fn json_roundtrip_is_bit_exact() {
        let net = FeedforwardNet::init_random(NetArchitecture::sigmoid(vec![5, 7, 3, 1]).unwrap(), 99);
        let scaling = TrainingScaling {
            x: ScalingParams::new(-0.1, 0.3).unwrap(),
            y: ScalingParams::new(-0.2, 1.0 / 3.0).unwrap(),
        };
        let doc = NetDocument::from_net(&net, Some(99), Some(scaling));
        let back = NetDocument::from_json(&doc.to_json().unwrap()).unwrap();
        assert_eq!(back, doc);
        let net2 = back.to_net().unwrap();
        let bits = |n: &FeedforwardNet| n.parameters().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&net), bits(&net2));
    }

    proptest! {
        #[test]
        fn sigmoid_layers_stay_inside_unit_interval(
            seed in 0u64..1000,
            x in proptest::collection::vec(-5.0f64..5.0, 3),
        ) {
            let net = FeedforwardNet::init_random(NetArchitecture::sigmoid(vec![3, 4, 2]).unwrap(), seed);
            let acts = net.forward(Array1::from(x).view()).unwrap();
            for k in 1..=2 {
                prop_assert_eq!(acts.layer(k).len(), net.architecture().dims()[k]);
                prop_assert!(acts.layer(k).iter().all(|&v| v > 0.0 && v < 1.0));
            }
        }
    }
}
