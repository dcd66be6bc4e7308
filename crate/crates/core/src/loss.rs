//! Tempered softmax and the cross-entropy family used for distillation.
//!
//! All losses are batch means and return their gradient with respect to the
//! student logits only; expert logits are treated as constants.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{shape_err, Error, Result};
use crate::{Scalar, Tensor};

/// Lower clamp applied to predicted probabilities inside logarithms.
pub const LOG_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KdHyperparams {
    pub temperature: f64,
    pub alpha: f64,
}

impl Default for KdHyperparams {
    fn default() -> Self {
        Self {
            temperature: 10.0,
            alpha: 0.9,
        }
    }
}

impl KdHyperparams {
    pub fn new(temperature: f64, alpha: f64) -> Result<Self> {
        let hp = Self { temperature, alpha };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::Domain(format!("temperature must be > 0, got {}", self.temperature)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Domain(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// A scalar loss and its gradient with respect to the student logits.
#[derive(Clone, Debug, PartialEq)]
pub struct LossValue<F> {
    pub value: F,
    pub grad: Tensor<F>,
}

fn check_temperature<F: Scalar>(t: F) -> Result<()> {
    if !(t.is_finite() && t > F::zero()) {
        return Err(Error::Domain(format!("temperature must be > 0, got {t:?}")));
    }
    Ok(())
}

fn check_pair<F: Scalar>(a: &Tensor<F>, b: &Tensor<F>, what: &str) -> Result<()> {
    if a.shape() != b.shape() || a.shape().len() != 2 {
        return Err(shape_err(
            what,
            format!("expected two equal [batch, classes] shapes, got {:?} and {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

/// Row-wise `softmax(z / t)`, with the row maximum subtracted first.
pub fn tempered_softmax<F: Scalar>(z: &Tensor<F>, t: F) -> Result<Tensor<F>> {
    check_temperature(t)?;
    let mut out = Vec::with_capacity(z.len());
    for row in z.rows() {
        let m = row.iter().copied().fold(F::neg_infinity(), F::max);
        let start = out.len();
        let mut sum = F::zero();
        for &v in row {
            let e = ((v - m) / t).exp();
            sum += e;
            out.push(e);
        }
        for e in &mut out[start..] {
            *e = *e / sum;
        }
    }
    Ok(Tensor::from_parts_unchecked(z.shape().to_vec(), out))
}

/// Row-wise `log softmax(z / t)`.
fn log_softmax<F: Scalar>(row: &[F], t: F, out: &mut Vec<F>) {
    let m = row.iter().copied().fold(F::neg_infinity(), F::max);
    let lse = row.iter().map(|&v| ((v - m) / t).exp()).sum::<F>().ln();
    out.extend(row.iter().map(|&v| (v - m) / t - lse));
}

/// Batch mean of `-sum_j p_target[j] * ln(max(p_pred[j], eps))`.
pub fn cross_entropy_soft<F: Scalar>(p_target: &Tensor<F>, p_pred: &Tensor<F>) -> Result<F> {
    check_pair(p_target, p_pred, "cross entropy")?;
    let eps = F::from_f64(LOG_EPS);
    let mut total = F::zero();
    for (pt, pp) in p_target.rows().zip(p_pred.rows()) {
        for (&a, &b) in pt.iter().zip(pp) {
            total -= a * b.max(eps).ln();
        }
    }
    Ok(total / F::from_f64(p_target.batch() as f64))
}

/// Cross-entropy of the distribution `target` against `softmax(z / t)`,
/// differentiated with respect to `z`.
///
/// With `q = softmax(z / t)` and `a_j = [q_j > eps]` (clamp inactive), the
/// per-row gradient is `(q_i * sum_j p_j a_j - p_i a_i) / t`, which reduces
/// to the familiar `(q - p) / t` when nothing is clamped.
pub fn soft_target_loss<F: Scalar>(target: &Tensor<F>, z: &Tensor<F>, t: F) -> Result<LossValue<F>> {
    check_temperature(t)?;
    check_pair(target, z, "soft target loss")?;
    let n = F::from_f64(z.batch() as f64);
    let log_eps = F::from_f64(libm::log(LOG_EPS));
    let mut value = F::zero();
    let mut grad = Vec::with_capacity(z.len());
    let mut logq = Vec::with_capacity(z.row_len());
    for (p, zr) in target.rows().zip(z.rows()) {
        logq.clear();
        log_softmax(zr, t, &mut logq);
        let mut active_mass = F::zero();
        for (&pj, &lq) in p.iter().zip(&logq) {
            if lq > log_eps {
                value -= pj * lq;
                active_mass += pj;
            } else {
                value -= pj * log_eps;
            }
        }
        for (&pj, &lq) in p.iter().zip(&logq) {
            let q = lq.exp();
            let own = if lq > log_eps { pj } else { F::zero() };
            grad.push((q * active_mass - own) / (t * n));
        }
    }
    Ok(LossValue {
        value: value / n,
        grad: Tensor::from_parts_unchecked(z.shape().to_vec(), grad),
    })
}

/// Distillation term against the selected expert:
/// `CE(softmax(z_expert / t), softmax(z_student / t))`.
pub fn kd_select_loss<F: Scalar>(z_student: &Tensor<F>, z_expert: &Tensor<F>, t: F) -> Result<LossValue<F>> {
    check_pair(z_student, z_expert, "distillation loss")?;
    let target = tempered_softmax(z_expert, t)?;
    soft_target_loss(&target, z_student, t)
}

pub fn one_hot<F: Scalar>(labels: &[usize], classes: usize) -> Result<Tensor<F>> {
    let mut data = alloc::vec![F::zero(); labels.len() * classes];
    for (i, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(Error::Data(format!("label {y} out of range for {classes} classes")));
        }
        data[i * classes + y] = F::one();
    }
    Tensor::new(alloc::vec![labels.len(), classes], data)
}

/// Hard-label cross-entropy at temperature 1.
pub fn hard_cross_entropy<F: Scalar>(z_student: &Tensor<F>, labels_one_hot: &Tensor<F>) -> Result<LossValue<F>> {
    soft_target_loss(labels_one_hot, z_student, F::one())
}

fn combine<F: Scalar>(kd: LossValue<F>, ce: LossValue<F>, hp: &KdHyperparams) -> LossValue<F> {
    let t = hp.temperature;
    let wk = F::from_f64(hp.alpha * t * t);
    let wc = F::from_f64(1.0 - hp.alpha);
    let grad = kd
        .grad
        .data()
        .iter()
        .zip(ce.grad.data())
        .map(|(&a, &b)| wk * a + wc * b)
        .collect();
    LossValue {
        value: wk * kd.value + wc * ce.value,
        grad: Tensor::from_parts_unchecked(kd.grad.shape().to_vec(), grad),
    }
}

/// `alpha * T^2 * KD_select + (1 - alpha) * CE(labels, softmax(z_student))`.
pub fn ceskd_total_loss<F: Scalar>(
    z_student: &Tensor<F>,
    z_expert: &Tensor<F>,
    labels_one_hot: &Tensor<F>,
    hp: &KdHyperparams,
) -> Result<LossValue<F>> {
    hp.validate()?;
    let kd = kd_select_loss(z_student, z_expert, F::from_f64(hp.temperature))?;
    let ce = hard_cross_entropy(z_student, labels_one_hot)?;
    Ok(combine(kd, ce, hp))
}

/// Same weighting as [`ceskd_total_loss`] but the distillation term is the
/// unweighted mean over all ancestor experts.
pub fn ensemble_kd_loss<F: Scalar>(
    z_student: &Tensor<F>,
    ancestors: &[Tensor<F>],
    labels_one_hot: &Tensor<F>,
    hp: &KdHyperparams,
) -> Result<LossValue<F>> {
    hp.validate()?;
    if ancestors.is_empty() {
        return Err(Error::Config("ensemble distillation needs at least one ancestor".into()));
    }
    let t = F::from_f64(hp.temperature);
    let mut value = F::zero();
    let mut grad = Tensor::zeros(z_student.shape());
    for z in ancestors {
        let term = kd_select_loss(z_student, z, t)?;
        value += term.value;
        for (g, &d) in grad.data_mut().iter_mut().zip(term.grad.data()) {
            *g += d;
        }
    }
    let count = F::from_f64(ancestors.len() as f64);
    let kd = LossValue {
        value: value / count,
        grad: grad.map(|g| g / count),
    };
    let ce = hard_cross_entropy(z_student, labels_one_hot)?;
    Ok(combine(kd, ce, hp))
}
