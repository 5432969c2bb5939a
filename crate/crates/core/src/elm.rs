//! Spike-input extreme learning machine.
//!
//! The first layer is random and frozen at construction. Only the linear
//! readout `beta` is learned, by ridge-regularised least squares on one-hot
//! class targets.
//!
//! Two hidden-layer paths share the same weights:
//!
//! * float: `H_j = max(0, sum_i w_ij x_i + b_j)`;
//! * analog: the current-mirror / counting-oscillator emulation, where the
//!   weights are log-normal mismatch factors and each hidden node reports a
//!   saturating integer count `min(floor(K * max(0, pre_j)), 2^bits - 1)`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::median_in_place;
use crate::seed::rng_from;
use crate::task::Command;

/// Behavioural parameters of the analog co-processor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalogConfig {
    /// Standard deviation of `ln(w)` across mirrors.
    pub sigma_m: f64,
    /// Oscillator counter width; counts saturate at `2^bits - 1`.
    pub counter_bits: u32,
    /// Counts per unit of pre-activation. `None` calibrates during [`fit`].
    pub gain: Option<f64>,
    /// Differential-pair emulation: each weight gets a random sign.
    pub signed: bool,
    /// Upper end of the uniform oscillator offset `b_j ~ U[0, bias_span]`,
    /// in pre-activation units.
    pub bias_span: f64,
}

impl Default for AnalogConfig {
    fn default() -> Self {
        Self {
            sigma_m: 0.5,
            counter_bits: 8,
            gain: None,
            signed: false,
            bias_span: 0.0,
        }
    }
}

impl AnalogConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_m >= 0.0) || !self.sigma_m.is_finite() {
            return Err(Error::InvalidArgument("sigma_m must be >= 0".into()));
        }
        if !(1..=32).contains(&self.counter_bits) {
            return Err(Error::InvalidArgument(format!(
                "counter_bits must be in [1, 32], got {}",
                self.counter_bits
            )));
        }
        if let Some(k) = self.gain {
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::InvalidArgument("gain K must be positive".into()));
            }
        }
        if !(self.bias_span >= 0.0) {
            return Err(Error::InvalidArgument("bias_span must be >= 0".into()));
        }
        Ok(())
    }

    pub fn saturation(&self) -> f64 {
        ((1u64 << self.counter_bits) - 1) as f64
    }

    /// Count the median pre-activation is mapped to by calibration.
    pub fn mid_range(&self) -> f64 {
        (1u64 << (self.counter_bits - 1)) as f64
    }
}

/// Which hidden-layer transfer to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HiddenPath {
    Float,
    Analog,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenActivation {
    pub values: Vec<f64>,
    pub quantized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElmModel {
    inputs: usize,
    hidden: usize,
    classes: usize,
    seed: u64,
    /// `inputs x hidden`, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
    /// `hidden x classes`, row-major.
    beta: Vec<f64>,
    analog: Option<AnalogConfig>,
    lambda: f64,
}

/// Builds an untrained model with a seeded random first layer.
pub fn init_model(
    inputs: usize,
    hidden: usize,
    classes: usize,
    seed: u64,
    analog: Option<AnalogConfig>,
) -> Result<ElmModel> {
    if inputs == 0 || hidden == 0 || classes == 0 {
        return Err(Error::InvalidArgument(format!(
            "ELM dimensions must be >= 1 (D = {inputs}, L = {hidden}, C = {classes})"
        )));
    }
    if let Some(a) = &analog {
        a.validate()?;
    }
    let mut rng = rng_from(seed);
    let n = inputs * hidden;
    let (weights, bias) = match &analog {
        Some(a) => {
            let mut w: Vec<f64> = (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    (a.sigma_m * z).exp()
                })
                .collect();
            if a.signed {
                for v in &mut w {
                    if rng.random_bool(0.5) {
                        *v = -*v;
                    }
                }
            }
            let b = (0..hidden)
                .map(|_| rng.random::<f64>() * a.bias_span)
                .collect();
            (w, b)
        }
        None => {
            let w = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let b = (0..hidden).map(|_| rng.random_range(-1.0..=1.0)).collect();
            (w, b)
        }
    };
    Ok(ElmModel {
        inputs,
        hidden,
        classes,
        seed,
        weights,
        bias,
        beta: vec![0.0; hidden * classes],
        analog,
        lambda: 0.0,
    })
}

impl ElmModel {
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.hidden + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn analog(&self) -> Option<&AnalogConfig> {
        self.analog.as_ref()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn is_trained(&self) -> bool {
        self.beta.iter().any(|&v| v != 0.0)
    }

    /// Replaces the readout. Intended for tests and hand-built decoders.
    pub fn with_beta(mut self, beta: Vec<f64>) -> Result<Self> {
        if beta.len() != self.hidden * self.classes {
            return Err(Error::InvalidArgument(format!(
                "beta needs {} entries, got {}",
                self.hidden * self.classes,
                beta.len()
            )));
        }
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite beta".into()));
        }
        self.beta = beta;
        Ok(self)
    }

    /// Sets the analog gain `K` explicitly.
    pub fn with_gain(mut self, gain: f64) -> Result<Self> {
        match self.analog.as_mut() {
            Some(a) => {
                a.gain = Some(gain);
                a.validate()?;
                Ok(self)
            }
            None => Err(Error::InvalidArgument("float-path model has no gain".into())),
        }
    }

    /// `sum_i w_ij x_i + b_j` for every hidden node.
    pub fn pre_activation(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.inputs {
            return Err(Error::InvalidArgument(format!(
                "feature length {} does not match D = {}",
                x.len(),
                self.inputs
            )));
        }
        let mut pre = self.bias.clone();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.hidden..(i + 1) * self.hidden];
            for (p, w) in pre.iter_mut().zip(row) {
                *p += w * xi;
            }
        }
        Ok(pre)
    }

    /// Hidden layer on the model's native path (analog when configured).
    pub fn hidden(&self, x: &[f64]) -> Result<HiddenActivation> {
        let path = if self.analog.is_some() {
            HiddenPath::Analog
        } else {
            HiddenPath::Float
        };
        self.hidden_with(x, path)
    }

    pub fn hidden_with(&self, x: &[f64], path: HiddenPath) -> Result<HiddenActivation> {
        let pre = self.pre_activation(x)?;
        match path {
            HiddenPath::Float => Ok(HiddenActivation {
                values: pre.into_iter().map(|p| p.max(0.0)).collect(),
                quantized: false,
            }),
            HiddenPath::Analog => {
                let a = self
                    .analog
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("model has no analog configuration".into()))?;
                let gain = a.gain.ok_or(Error::NotTrained)?;
                let sat = a.saturation();
                Ok(HiddenActivation {
                    values: pre
                        .into_iter()
                        .map(|p| (gain * p.max(0.0)).floor().min(sat))
                        .collect(),
                    quantized: true,
                })
            }
        }
    }

    /// Linear readout `o_k = sum_j beta_jk H_j`.
    pub fn decode(&self, h: &HiddenActivation) -> Result<Vec<f64>> {
        if !self.is_trained() {
            return Err(Error::NotTrained);
        }
        self.decode_untrained(h)
    }

    /// Readout without the trained-model check.
    pub fn decode_untrained(&self, h: &HiddenActivation) -> Result<Vec<f64>> {
        if h.values.len() != self.hidden {
            return Err(Error::InvalidArgument(format!(
                "hidden length {} does not match L = {}",
                h.values.len(),
                self.hidden
            )));
        }
        let mut o = vec![0.0; self.classes];
        for (j, &hj) in h.values.iter().enumerate() {
            let row = &self.beta[j * self.classes..(j + 1) * self.classes];
            for (ok, b) in o.iter_mut().zip(row) {
                *ok += b * hj;
            }
        }
        Ok(o)
    }

    /// Features to command on the native path.
    pub fn predict(&self, x: &[f64]) -> Result<Command> {
        classify(&self.decode(&self.hidden(x)?)?)
    }

    pub fn predict_with(&self, x: &[f64], path: HiddenPath) -> Result<Command> {
        classify(&self.decode(&self.hidden_with(x, path)?)?)
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(o: &[f64]) -> Result<usize> {
    if o.is_empty() {
        return Err(Error::InvalidArgument("empty output vector".into()));
    }
    if o.iter().any(|v| v.is_nan()) {
        return Err(Error::Numeric("NaN in decoder output".into()));
    }
    let mut best = 0;
    for (k, &v) in o.iter().enumerate().skip(1) {
        if v > o[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Argmax over `[Forward, Right, Left, Stop]`.
pub fn classify(o: &[f64]) -> Result<Command> {
    if o.len() != Command::COUNT {
        return Err(Error::InvalidArgument(format!(
            "expected {} outputs, got {}",
            Command::COUNT,
            o.len()
        )));
    }
    Ok(Command::ALL[argmax(o)?])
}

/// Hidden activations with one-hot targets and a ridge parameter.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub h: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub lambda: f64,
}

impl TrainingSet {
    pub fn new(h: DMatrix<f64>, t: DMatrix<f64>, lambda: f64) -> Result<Self> {
        if h.nrows() == 0 {
            return Err(Error::Training("training set is empty".into()));
        }
        if h.nrows() != t.nrows() {
            return Err(Error::InvalidArgument(format!(
                "H has {} rows but T has {}",
                h.nrows(),
                t.nrows()
            )));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument("lambda must be >= 0".into()));
        }
        for (r, row) in t.row_iter().enumerate() {
            if (row.sum() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("target row {r} does not sum to 1")));
            }
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite hidden activation".into()));
        }
        Ok(Self { h, t, lambda })
    }

    /// One-hot targets from class labels.
    pub fn one_hot(labels: &[usize], classes: usize) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(labels.len(), classes);
        for (r, &c) in labels.iter().enumerate() {
            t[(r, c)] = 1.0;
        }
        t
    }
}

/// Solves `min ||H beta - T||^2 + lambda ||beta||^2` through the SVD of `H`:
/// `beta = V diag(s / (s^2 + lambda)) U^T T`.
pub fn ridge_solve(h: &DMatrix<f64>, t: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let (n, l) = h.shape();
    let svd = h.clone().svd(true, true);
    let u = svd.u.as_ref().expect("U requested");
    let v_t = svd.v_t.as_ref().expect("V^T requested");
    let s = &svd.singular_values;
    let s_max = s.iter().copied().fold(0.0, f64::max);
    if lambda == 0.0 {
        let tol = (n.max(l) as f64) * f64::EPSILON * s_max;
        let rank = s.iter().filter(|&&v| v > tol).count();
        if rank < l || s_max == 0.0 {
            return Err(Error::Singular(format!(
                "H has rank {rank} < L = {l}; use lambda > 0"
            )));
        }
    }
    // U^T T scaled row-wise by the filter factors, then mapped back with V.
    let mut ut_t = u.transpose() * t;
    for (r, mut row) in ut_t.row_iter_mut().enumerate() {
        let sv = s[r];
        let f = if sv == 0.0 { 0.0 } else { sv / (sv * sv + lambda) };
        row *= f;
    }
    let beta = v_t.transpose() * ut_t;
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite readout weights".into()));
    }
    Ok(beta)
}

/// Returns a copy of `model` whose readout solves the ridge problem on `data`.
/// The first layer is left untouched.
pub fn train(model: &ElmModel, data: &TrainingSet) -> Result<ElmModel> {
    if data.h.ncols() != model.hidden {
        return Err(Error::InvalidArgument(format!(
            "H has {} columns but L = {}",
            data.h.ncols(),
            model.hidden
        )));
    }
    if data.t.ncols() != model.classes {
        return Err(Error::InvalidArgument(format!(
            "T has {} columns but C = {}",
            data.t.ncols(),
            model.classes
        )));
    }
    let beta = ridge_solve(&data.h, &data.t, data.lambda)?;
    let mut out = model.clone();
    out.beta = (0..model.hidden)
        .flat_map(|j| (0..model.classes).map(move |k| (j, k)))
        .map(|(j, k)| beta[(j, k)])
        .collect();
    out.lambda = data.lambda;
    Ok(out)
}

/// Gain that maps the median rectified pre-activation over `features` to the
/// counter's mid-range.
pub fn calibrate_gain(model: &ElmModel, features: &[Vec<f64>]) -> Result<f64> {
    let a = model
        .analog
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("calibration needs an analog model".into()))?;
    let mut pre = Vec::with_capacity(features.len() * model.hidden);
    for x in features {
        pre.extend(model.pre_activation(x)?.into_iter().map(|p| p.max(0.0)));
    }
    if pre.is_empty() {
        return Err(Error::Training("no features to calibrate on".into()));
    }
    let median = median_in_place(&mut pre);
    if median > 0.0 {
        Ok(a.mid_range() / median)
    } else {
        let max = pre.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            Ok(a.mid_range() / max)
        } else {
            Ok(1.0)
        }
    }
}

/// How the ridge parameter handed to [`fit_with`] is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RidgeScale {
    /// Used as-is.
    Absolute,
    /// Multiplied by the mean squared hidden activation times the row count,
    /// `tr(HᵀH) / L`, so the penalty does not depend on the counter range.
    #[default]
    Relative,
}

/// Calibrates the analog gain when it is not fixed, then trains the readout on
/// the hidden activations of `features` against one-hot `labels`.
pub fn fit(model: &ElmModel, features: &[Vec<f64>], labels: &[Command], lambda: f64) -> Result<ElmModel> {
    fit_with(model, features, labels, lambda, RidgeScale::Absolute)
}

pub fn fit_with(
    model: &ElmModel,
    features: &[Vec<f64>],
    labels: &[Command],
    lambda: f64,
    scale: RidgeScale,
) -> Result<ElmModel> {
    if features.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} feature vectors but {} labels",
            features.len(),
            labels.len()
        )));
    }
    if features.is_empty() {
        return Err(Error::Training("no training rows".into()));
    }
    let mut base = model.clone();
    if let Some(a) = base.analog.as_mut() {
        if a.gain.is_none() {
            a.gain = Some(calibrate_gain(model, features)?);
        }
    }
    let l = base.hidden;
    let mut h = DMatrix::zeros(features.len(), l);
    for (r, x) in features.iter().enumerate() {
        let act = base.hidden(x)?;
        for (j, v) in act.values.into_iter().enumerate() {
            h[(r, j)] = v;
        }
    }
    let lambda = match scale {
        RidgeScale::Absolute => lambda,
        RidgeScale::Relative => lambda * h.norm_squared() / l as f64,
    };
    let idx: Vec<usize> = labels.iter().map(|c| c.index()).collect();
    let t = TrainingSet::one_hot(&idx, base.classes);
    train(&base, &TrainingSet::new(h, t, lambda)?)
}

/// Fraction of rows whose predicted command equals the label.
pub fn offline_accuracy(model: &ElmModel, features: &[Vec<f64>], labels: &[Command]) -> Result<f64> {
    if features.len() != labels.len() || features.is_empty() {
        return Err(Error::InvalidArgument(
            "features and labels must have equal non-zero length".into(),
        ));
    }
    let mut hits = 0usize;
    for (x, &y) in features.iter().zip(labels) {
        if model.predict(x)? == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / labels.len() as f64)
}

/// On-disk model layout. Matrices are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ModelDocument {
    pub D: usize,
    pub L: usize,
    pub C: usize,
    pub seed: u64,
    pub sigma_m: Option<f64>,
    pub counter_bits: Option<u32>,
    pub K: Option<f64>,
    pub signed: Option<bool>,
    pub lambda: f64,
    pub W: Vec<f64>,
    pub b: Vec<f64>,
    pub beta: Vec<f64>,
}

impl From<&ElmModel> for ModelDocument {
    fn from(m: &ElmModel) -> Self {
        let a = m.analog.as_ref();
        ModelDocument {
            D: m.inputs,
            L: m.hidden,
            C: m.classes,
            seed: m.seed,
            sigma_m: a.map(|a| a.sigma_m),
            counter_bits: a.map(|a| a.counter_bits),
            K: a.and_then(|a| a.gain),
            signed: a.map(|a| a.signed),
            lambda: m.lambda,
            W: m.weights.clone(),
            b: m.bias.clone(),
            beta: m.beta.clone(),
        }
    }
}

impl TryFrom<ModelDocument> for ElmModel {
    type Error = Error;

    fn try_from(d: ModelDocument) -> Result<Self> {
        if d.W.len() != d.D * d.L || d.b.len() != d.L || d.beta.len() != d.L * d.C {
            return Err(Error::Parse("model matrix sizes do not match D, L, C".into()));
        }
        let analog = match (d.sigma_m, d.counter_bits) {
            (Some(sigma_m), Some(counter_bits)) => {
                let a = AnalogConfig {
                    sigma_m,
                    counter_bits,
                    gain: d.K,
                    signed: d.signed.unwrap_or(false),
                    bias_span: 0.0,
                };
                a.validate()?;
                Some(a)
            }
            (None, None) => None,
            _ => return Err(Error::Parse("sigma_m and counter_bits must both be set or both null".into())),
        };
        if d.W.iter().chain(&d.b).chain(&d.beta).any(|v| !v.is_finite()) {
            return Err(Error::Parse("non-finite model parameter".into()));
        }
        Ok(ElmModel {
            inputs: d.D,
            hidden: d.L,
            classes: d.C,
            seed: d.seed,
            weights: d.W,
            bias: d.b,
            beta: d.beta,
            analog,
            lambda: d.lambda,
        })
    }
}

impl ElmModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelDocument::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        ElmModel::try_from(doc)
    }
}
