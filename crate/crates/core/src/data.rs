//! Datasets, losses, finite model classes and the precomputed loss matrix.
//!
//! Every risk, supremum and complexity in the crate is a reduction over a
//! [`LossMatrix`]: row `i` is a sample point, column `j` a hypothesis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether row order carries meaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ordering {
    #[default]
    Exchangeable,
    /// Index order is time order and must survive splitting.
    Temporal,
}

/// Responses `y` and a row-major predictor matrix `x` (n rows, p columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    x: Vec<f64>,
    n: usize,
    p: usize,
    ordering: Ordering,
}

impl Dataset {
    pub const MIN_ROWS: usize = 4;

    pub fn new(y: Vec<f64>, rows: Vec<Vec<f64>>, ordering: Ordering) -> Result<Self> {
        let n = y.len();
        if rows.len() != n {
            return Err(Error::InvalidDataset(format!(
                "y has {n} entries but x has {} rows",
                rows.len()
            )));
        }
        if n < Self::MIN_ROWS {
            return Err(Error::InvalidDataset(format!(
                "need at least {} rows, got {n}",
                Self::MIN_ROWS
            )));
        }
        let p = rows[0].len();
        if p == 0 {
            return Err(Error::InvalidDataset("need at least one predictor".into()));
        }
        let mut x = Vec::with_capacity(n * p);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != p {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has {} predictors, expected {p}",
                    row.len()
                )));
            }
            x.extend(row);
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!("non-finite response at row {i}")));
        }
        if let Some(k) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite predictor at row {}, column {}",
                k / p,
                k % p
            )));
        }
        Ok(Self { y, x, n, p, ordering })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn ordering(&self) -> Ordering {
        self.ordering
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    Squared,
    Absolute,
    /// Predicted and true labels are `[value >= threshold]`.
    ZeroOne {
        threshold: f64,
    },
    /// Losses given directly, row-major `n x |class|`.
    UserTable {
        values: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    #[serde(flatten)]
    pub kind: LossKind,
    /// Truncation level: entries become `min(Q, clip)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        Self { kind, clip: None }
    }

    pub fn with_clip(mut self, clip: f64) -> Self {
        self.clip = Some(clip);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let LossKind::ZeroOne { threshold } = self.kind {
            if !threshold.is_finite() {
                return Err(Error::InvalidLoss("zero-one threshold must be finite".into()));
            }
        }
        if let Some(c) = self.clip {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidLoss(format!("clip must be positive, got {c}")));
            }
        }
        Ok(())
    }

    fn eval(&self, y: f64, prediction: f64) -> f64 {
        let q = match self.kind {
            LossKind::Squared => (y - prediction).powi(2),
            LossKind::Absolute => (y - prediction).abs(),
            LossKind::ZeroOne { threshold } => {
                if (prediction >= threshold) == (y >= threshold) {
                    0.0
                } else {
                    1.0
                }
            }
            LossKind::UserTable { .. } => unreachable!("table losses are not evaluated"),
        };
        match self.clip {
            Some(m) => q.min(m),
            None => q,
        }
    }

    /// A bound on Q that holds by construction of the loss.
    fn structural_envelope(&self) -> Option<f64> {
        let kind_bound = match self.kind {
            LossKind::ZeroOne { .. } => Some(1.0),
            _ => None,
        };
        match (kind_bound, self.clip) {
            (Some(a), Some(b)) => Some(f64::min(a, b)),
            (a, b) => a.or(b),
        }
    }
}

/// A finite, ordered list of linear hypotheses `x -> b . x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelClass {
    hypotheses: Vec<Vec<f64>>,
    labels: Vec<String>,
    envelope: Option<f64>,
}

impl ModelClass {
    pub fn new(hypotheses: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> Result<Self> {
        if hypotheses.is_empty() {
            return Err(Error::InvalidModel("model class is empty".into()));
        }
        let p = hypotheses[0].len();
        if p == 0 {
            return Err(Error::InvalidModel(
                "hypotheses need at least one coefficient".into(),
            ));
        }
        for (j, b) in hypotheses.iter().enumerate() {
            if b.len() != p {
                return Err(Error::InvalidModel(format!(
                    "hypothesis {j} has {} coefficients, expected {p}",
                    b.len()
                )));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!("hypothesis {j} is not finite")));
            }
            if let Some(dup) = hypotheses[..j].iter().position(|other| other == b) {
                return Err(Error::InvalidModel(format!(
                    "hypothesis {j} duplicates hypothesis {dup}"
                )));
            }
        }
        let labels = match labels {
            Some(l) if l.len() != hypotheses.len() => {
                return Err(Error::InvalidModel(format!(
                    "{} labels for {} hypotheses",
                    l.len(),
                    hypotheses.len()
                )))
            }
            Some(l) => l,
            None => hypotheses.iter().map(|b| default_label(b)).collect(),
        };
        Ok(Self {
            hypotheses,
            labels,
            envelope: None,
        })
    }

    /// Cartesian product of per-coefficient axes, last coefficient varying fastest.
    pub fn grid(axes: &[Vec<f64>]) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|a| a.is_empty()) {
            return Err(Error::InvalidModel(
                "every grid axis needs at least one value".into(),
            ));
        }
        let mut out: Vec<Vec<f64>> = vec![Vec::new()];
        for axis in axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&v| {
                        let mut b = prefix.clone();
                        b.push(v);
                        b
                    })
                })
                .collect();
        }
        Self::new(out, None)
    }

    /// Declares that every loss built against this class lies in `[0, m]`.
    pub fn with_envelope(mut self, m: f64) -> Result<Self> {
        if !(m >= 0.0 && m.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "envelope must be finite and >= 0, got {m}"
            )));
        }
        self.envelope = Some(m);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn p(&self) -> usize {
        self.hypotheses[0].len()
    }

    pub fn hypothesis(&self, j: usize) -> &[f64] {
        &self.hypotheses[j]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn envelope(&self) -> Option<f64> {
        self.envelope
    }
}

fn default_label(b: &[f64]) -> String {
    let parts: Vec<String> = b.iter().map(|v| v.to_string()).collect();
    format!("[{}]", parts.join(","))
}

/// Where the envelope value of a loss matrix comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeSource {
    /// Supplied with the model class.
    Declared,
    /// Implied by the loss (zero-one, clipping).
    Structural,
    /// Largest observed entry; not a certified bound.
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub value: f64,
    pub source: EnvelopeSource,
}

impl Envelope {
    pub fn certified(&self) -> bool {
        self.source != EnvelopeSource::Empirical
    }
}

/// `values[i][j] = Q(b_j, y_i, x_i)`, stored row-major. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix {
    n: usize,
    m: usize,
    values: Vec<f64>,
    envelope: Option<Envelope>,
    labels: Vec<String>,
}

impl LossMatrix {
    /// Wraps precomputed losses. `envelope`, when given, is treated as declared.
    pub fn from_rows(rows: Vec<Vec<f64>>, envelope: Option<f64>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyIndexSet);
        }
        let m = rows[0].len();
        if m == 0 {
            return Err(Error::InvalidModel("loss rows are empty".into()));
        }
        let mut values = Vec::with_capacity(n * m);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != m {
                return Err(Error::InvalidModel(format!(
                    "loss row {i} has {} entries, expected {m}",
                    r.len()
                )));
            }
            values.extend(r);
        }
        Self::from_flat(n, m, values, envelope)
    }

    pub fn from_flat(n: usize, m: usize, values: Vec<f64>, envelope: Option<f64>) -> Result<Self> {
        assert_eq!(values.len(), n * m, "flat loss buffer has the wrong length");
        check_entries(&values, m, envelope)?;
        let envelope = envelope.map(|value| Envelope {
            value,
            source: EnvelopeSource::Declared,
        });
        Ok(Self {
            n,
            m,
            values,
            envelope,
            labels: (0..m).map(|j| format!("h{j}")).collect(),
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.m);
        self.labels = labels;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of hypotheses.
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn envelope(&self) -> Option<Envelope> {
        self.envelope
    }

    pub fn max_entry(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Per-hypothesis mean over all rows.
    pub fn column_means(&self) -> Vec<f64> {
        let all: Vec<usize> = (0..self.n).collect();
        risks_over(self, &all)
    }

    /// A new matrix holding a subset of hypotheses, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        for &c in cols {
            if c >= self.m {
                return Err(Error::HypothesisOutOfRange {
                    index: c,
                    len: self.m,
                });
            }
        }
        if cols.is_empty() {
            return Err(Error::InvalidModel("no columns selected".into()));
        }
        let mut values = Vec::with_capacity(self.n * cols.len());
        for i in 0..self.n {
            values.extend(cols.iter().map(|&c| self.get(i, c)));
        }
        Ok(Self {
            n: self.n,
            m: cols.len(),
            values,
            envelope: self.envelope,
            labels: cols.iter().map(|&c| self.labels[c].clone()).collect(),
        })
    }

    pub(crate) fn validate_indices(&self, indices: &[usize]) -> Result<()> {
        if indices.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        match indices.iter().find(|&&i| i >= self.n) {
            Some(&index) => Err(Error::IndexOutOfRange { index, len: self.n }),
            None => Ok(()),
        }
    }
}

fn check_entries(values: &[f64], m: usize, envelope: Option<f64>) -> Result<()> {
    for (k, &v) in values.iter().enumerate() {
        let (row, col) = (k / m, k % m);
        if !v.is_finite() {
            return Err(Error::NonFiniteLoss { row, col });
        }
        if v < 0.0 {
            return Err(Error::NegativeLoss { row, col, value: v });
        }
        if let Some(envelope) = envelope {
            if v > envelope {
                return Err(Error::EnvelopeViolated {
                    row,
                    col,
                    value: v,
                    envelope,
                });
            }
        }
    }
    Ok(())
}

pub fn build_loss_matrix(data: &Dataset, loss: &LossSpec, model: &ModelClass) -> Result<LossMatrix> {
    loss.validate()?;
    let (n, m) = (data.n(), model.len());
    let values = match &loss.kind {
        LossKind::UserTable { values: table } => {
            if table.len() != n || table.iter().any(|r| r.len() != m) {
                return Err(Error::InvalidLoss(format!(
                    "loss table must be {n} x {m} to match dataset and model class"
                )));
            }
            let clip = loss.clip.unwrap_or(f64::INFINITY);
            table.iter().flatten().map(|&q| q.min(clip)).collect::<Vec<_>>()
        }
        _ => {
            if model.p() != data.p() {
                return Err(Error::InvalidModel(format!(
                    "hypotheses have {} coefficients but the dataset has {} predictors",
                    model.p(),
                    data.p()
                )));
            }
            let mut values = Vec::with_capacity(n * m);
            for i in 0..n {
                let x = data.row(i);
                for j in 0..m {
                    let prediction: f64 = model.hypothesis(j).iter().zip(x).map(|(b, v)| b * v).sum();
                    values.push(loss.eval(data.y()[i], prediction));
                }
            }
            values
        }
    };
    check_entries(&values, m, model.envelope())?;
    let envelope = match (model.envelope(), loss.structural_envelope()) {
        (Some(value), _) => Envelope {
            value,
            source: EnvelopeSource::Declared,
        },
        (None, Some(value)) => Envelope {
            value,
            source: EnvelopeSource::Structural,
        },
        (None, None) => Envelope {
            value: values.iter().copied().fold(0.0, f64::max),
            source: EnvelopeSource::Empirical,
        },
    };
    Ok(LossMatrix {
        n,
        m,
        values,
        envelope: Some(envelope),
        labels: model.labels().to_vec(),
    })
}

/// Mean of column `j` over `indices`.
pub fn empirical_risk(lm: &LossMatrix, indices: &[usize], j: usize) -> Result<f64> {
    lm.validate_indices(indices)?;
    if j >= lm.m() {
        return Err(Error::HypothesisOutOfRange {
            index: j,
            len: lm.m(),
        });
    }
    let sum: f64 = indices.iter().map(|&i| lm.get(i, j)).sum();
    Ok(sum / indices.len() as f64)
}

/// Empirical risk of every hypothesis over `indices` (unchecked).
pub(crate) fn risks_over(lm: &LossMatrix, indices: &[usize]) -> Vec<f64> {
    let mut acc = vec![0.0; lm.m()];
    for &i in indices {
        for (a, v) in acc.iter_mut().zip(lm.row(i)) {
            *a += v;
        }
    }
    let len = indices.len() as f64;
    acc.iter_mut().for_each(|a| *a /= len);
    acc
}
