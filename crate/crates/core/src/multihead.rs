//! Multi-head winner-take-all loss for ambiguity-resolving grasp regression.
//!
//! A prediction carries N heads, each with a joint configuration, a small
//! pose correction, a quality estimate, and a logit. Only the head whose
//! joint configuration is closest to the ground truth receives regression
//! loss; the logits are trained with cross entropy toward the winner, so at
//! inference the head with the largest logit is the mode most frequent in
//! the training data. `fit_modes` treats the head parameters as free
//! variables and descends the mean loss directly - a network-free harness
//! showing that multiple heads recover distinct modes where a single output
//! collapses into their mixture.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::rng;

pub const JOINT_DIM: usize = 12;
pub const POSE_DIM: usize = 6;
pub const DEFAULT_HEADS: usize = 5;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct HeadOutput {
    pub q: [f64; JOINT_DIM],
    /// Translation (3) + rotation vector (3).
    pub pose_correction: [f64; POSE_DIM],
    pub quality: f64,
    pub logit: f64,
}

impl HeadOutput {
    pub fn zeros() -> Self {
        HeadOutput {
            q: [0.0; JOINT_DIM],
            pose_correction: [0.0; POSE_DIM],
            quality: 0.0,
            logit: 0.0,
        }
    }

    fn is_finite(&self) -> bool {
        self.q.iter().all(|v| v.is_finite())
            && self.pose_correction.iter().all(|v| v.is_finite())
            && self.quality.is_finite()
            && self.logit.is_finite()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MultiHeadPrediction {
    pub heads: Vec<HeadOutput>,
}

impl MultiHeadPrediction {
    pub fn zeros(n: usize) -> Self {
        MultiHeadPrediction {
            heads: vec![HeadOutput::zeros(); n],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GroundTruthGrasp {
    pub q: [f64; JOINT_DIM],
    pub pose_correction: [f64; POSE_DIM],
    pub quality: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct LossWeights {
    pub joint: f64,
    pub quality: f64,
    pub pose: f64,
    pub class: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            joint: 1.0,
            quality: 1.0,
            pose: 1.0,
            class: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub winner: usize,
    pub joint: f64,
    pub quality: f64,
    pub pose: f64,
    pub class: f64,
    pub total: f64,
    pub weights: LossWeights,
}

/// Index of the head whose joint configuration is closest to the ground
/// truth (Euclidean), ties to the lowest index.
pub fn select_winner(pred: &MultiHeadPrediction, gt: &GroundTruthGrasp) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, head) in pred.heads.iter().enumerate() {
        let d = joint_distance(&head.q, &gt.q);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

fn joint_distance(a: &[f64; JOINT_DIM], b: &[f64; JOINT_DIM]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn pose_distance(a: &[f64; POSE_DIM], b: &[f64; POSE_DIM]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Winner-take-all loss terms: unsquared joint norm on the winner, absolute
/// quality error, pose-correction norm, and softmax cross entropy on the
/// head frequencies.
pub fn compute_losses(
    pred: &MultiHeadPrediction,
    gt: &GroundTruthGrasp,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    if pred.heads.is_empty() {
        return Err(CoreError::Precondition("prediction has no heads".into()));
    }
    if !pred.heads.iter().all(HeadOutput::is_finite) {
        return Err(CoreError::NonFinite("prediction contains non-finite values".into()));
    }
    if !gt.q.iter().all(|v| v.is_finite())
        || !gt.pose_correction.iter().all(|v| v.is_finite())
        || !gt.quality.is_finite()
    {
        return Err(CoreError::NonFinite("ground truth contains non-finite values".into()));
    }
    let winner = select_winner(pred, gt);
    let head = &pred.heads[winner];
    let joint = joint_distance(&head.q, &gt.q);
    let quality = (head.quality - gt.quality).abs();
    let pose = pose_distance(&head.pose_correction, &gt.pose_correction);
    let logits: Vec<f64> = pred.heads.iter().map(|h| h.logit).collect();
    let class = -softmax(&logits)[winner].ln();
    let total = weights.joint * joint
        + weights.quality * quality
        + weights.pose * pose
        + weights.class * class;
    Ok(LossBreakdown {
        winner,
        joint,
        quality,
        pose,
        class,
        total,
        weights: *weights,
    })
}

/// Per-head gradient of the total loss.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadGradient {
    pub q: [f64; JOINT_DIM],
    pub pose_correction: [f64; POSE_DIM],
    pub quality: f64,
    pub logit: f64,
}

impl HeadGradient {
    fn zeros() -> Self {
        HeadGradient {
            q: [0.0; JOINT_DIM],
            pose_correction: [0.0; POSE_DIM],
            quality: 0.0,
            logit: 0.0,
        }
    }
}

/// Gradients of `compute_losses(...).total` with respect to every head
/// parameter. Non-winner heads receive gradient only through their logits
/// (softmax cross entropy); norms use the zero subgradient at their minima.
pub fn loss_gradients(
    pred: &MultiHeadPrediction,
    gt: &GroundTruthGrasp,
    weights: &LossWeights,
) -> Result<(LossBreakdown, Vec<HeadGradient>)> {
    let breakdown = compute_losses(pred, gt, weights)?;
    let j = breakdown.winner;
    let mut grads = vec![HeadGradient::zeros(); pred.heads.len()];

    let head = &pred.heads[j];
    if breakdown.joint > 0.0 {
        for i in 0..JOINT_DIM {
            grads[j].q[i] = weights.joint * (head.q[i] - gt.q[i]) / breakdown.joint;
        }
    }
    if breakdown.pose > 0.0 {
        for i in 0..POSE_DIM {
            grads[j].pose_correction[i] =
                weights.pose * (head.pose_correction[i] - gt.pose_correction[i]) / breakdown.pose;
        }
    }
    if breakdown.quality > 0.0 {
        grads[j].quality = weights.quality * (head.quality - gt.quality).signum();
    }
    let logits: Vec<f64> = pred.heads.iter().map(|h| h.logit).collect();
    let probs = softmax(&logits);
    for (k, g) in grads.iter_mut().enumerate() {
        g.logit = weights.class * (probs[k] - f64::from(u8::from(k == j)));
    }
    Ok((breakdown, grads))
}

/// The head used at inference: largest logit, ties to the lowest index.
pub fn select_inference(pred: &MultiHeadPrediction) -> &HeadOutput {
    let mut best = 0;
    for (k, head) in pred.heads.iter().enumerate() {
        if head.logit > pred.heads[best].logit {
            best = k;
        }
    }
    &pred.heads[best]
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub prediction: MultiHeadPrediction,
    /// Mean total loss after each step.
    pub history: Vec<f64>,
}

/// Fits head parameters to a dataset by gradient descent on the mean
/// winner-take-all loss, with a linearly decaying step. Heads initialize at
/// the dataset mean plus a small seeded jitter, so distinct heads capture
/// distinct modes through the winner assignment.
pub fn fit_modes(
    samples: &[GroundTruthGrasp],
    n_heads: usize,
    steps: usize,
    step_size: f64,
    seed: u64,
) -> Result<FitResult> {
    if samples.len() < 2 {
        return Err(CoreError::Precondition(
            "fit_modes needs at least 2 samples".into(),
        ));
    }
    if n_heads == 0 || steps == 0 || !(step_size > 0.0) {
        return Err(CoreError::Precondition(
            "heads, steps, and step size must be positive".into(),
        ));
    }
    let weights = LossWeights::default();

    // Initialize at the dataset mean with a small jitter.
    let n = samples.len() as f64;
    let mut mean = GroundTruthGrasp {
        q: [0.0; JOINT_DIM],
        pose_correction: [0.0; POSE_DIM],
        quality: 0.0,
    };
    for s in samples {
        for i in 0..JOINT_DIM {
            mean.q[i] += s.q[i] / n;
        }
        for i in 0..POSE_DIM {
            mean.pose_correction[i] += s.pose_correction[i] / n;
        }
        mean.quality += s.quality / n;
    }
    let spread = samples
        .iter()
        .map(|s| joint_distance(&s.q, &mean.q))
        .fold(0.0, f64::max)
        .max(1e-6);
    let jitter = 1e-3 * spread;
    let mut pred = MultiHeadPrediction::zeros(n_heads);
    use rand::Rng;
    let mut r = rng::stream(seed, "fit-modes/init");
    for head in &mut pred.heads {
        for i in 0..JOINT_DIM {
            head.q[i] = mean.q[i] + (r.gen::<f64>() * 2.0 - 1.0) * jitter;
        }
        for i in 0..POSE_DIM {
            head.pose_correction[i] =
                mean.pose_correction[i] + (r.gen::<f64>() * 2.0 - 1.0) * jitter;
        }
        head.quality = mean.quality + (r.gen::<f64>() * 2.0 - 1.0) * jitter;
        head.logit = 0.0;
    }

    let mean_loss_and_grads = |pred: &MultiHeadPrediction| -> Result<(f64, Vec<HeadGradient>)> {
        let mut total = 0.0;
        let mut acc = vec![HeadGradient::zeros(); pred.heads.len()];
        for s in samples {
            let (breakdown, grads) = loss_gradients(pred, s, &weights)?;
            total += breakdown.total / n;
            for (a, g) in acc.iter_mut().zip(&grads) {
                for i in 0..JOINT_DIM {
                    a.q[i] += g.q[i] / n;
                }
                for i in 0..POSE_DIM {
                    a.pose_correction[i] += g.pose_correction[i] / n;
                }
                a.quality += g.quality / n;
                a.logit += g.logit / n;
            }
        }
        Ok((total, acc))
    };

    let mut history = Vec::with_capacity(steps + 1);
    let mut initial_loss = f64::INFINITY;
    for t in 0..steps {
        let decay = 1.0 - t as f64 / steps as f64;
        let step = step_size * decay;
        let (loss, grads) = mean_loss_and_grads(&pred)?;
        if t == 0 {
            initial_loss = loss;
        }
        history.push(loss);
        // The floor keeps subgradient overshoot near an already-optimal
        // start from being mistaken for divergence.
        if loss > 10.0 * initial_loss.max(1e-2) {
            return Err(CoreError::Diverged(format!(
                "loss {loss} exceeded 10x initial {initial_loss} at step {t}"
            )));
        }
        for (head, g) in pred.heads.iter_mut().zip(&grads) {
            for i in 0..JOINT_DIM {
                head.q[i] -= step * g.q[i];
            }
            for i in 0..POSE_DIM {
                head.pose_correction[i] -= step * g.pose_correction[i];
            }
            head.quality -= step * g.quality;
            head.logit -= step * g.logit;
        }
    }
    let (final_loss, _) = mean_loss_and_grads(&pred)?;
    history.push(final_loss);
    Ok(FitResult {
        prediction: pred,
        history,
    })
}

/// Loss history as `step,loss` CSV.
pub fn write_history_csv(path: impl AsRef<Path>, history: &[f64]) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "step,loss")?;
    for (i, loss) in history.iter().enumerate() {
        writeln!(w, "{i},{loss}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::Rng;

    fn random_prediction(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> MultiHeadPrediction {
        let mut pred = MultiHeadPrediction::zeros(n);
        for head in &mut pred.heads {
            for v in &mut head.q {
                *v = r.gen::<f64>() * 2.0 - 1.0;
            }
            for v in &mut head.pose_correction {
                *v = r.gen::<f64>() * 2.0 - 1.0;
            }
            head.quality = r.gen::<f64>();
            head.logit = r.gen::<f64>() * 4.0 - 2.0;
        }
        pred
    }

    fn random_gt(r: &mut rand_chacha::ChaCha8Rng) -> GroundTruthGrasp {
        let mut gt = GroundTruthGrasp {
            q: [0.0; JOINT_DIM],
            pose_correction: [0.0; POSE_DIM],
            quality: r.gen(),
        };
        for v in &mut gt.q {
            *v = r.gen::<f64>() * 2.0 - 1.0;
        }
        for v in &mut gt.pose_correction {
            *v = r.gen::<f64>() * 2.0 - 1.0;
        }
        gt
    }

    /// Two-mode dataset builder shared with the acceptance suite.
    pub fn two_mode_dataset(
        n: usize,
        fraction_a: f64,
    ) -> (Vec<GroundTruthGrasp>, GroundTruthGrasp, GroundTruthGrasp) {
        let mut mode_a = GroundTruthGrasp {
            q: [0.0; JOINT_DIM],
            pose_correction: [0.1; POSE_DIM],
            quality: 0.8,
        };
        let mut mode_b = mode_a.clone();
        mode_a.q = [0.2; JOINT_DIM];
        // Separation 1.0 along a mix of joints.
        for i in 0..JOINT_DIM {
            mode_b.q[i] = mode_a.q[i] + 1.0 / (JOINT_DIM as f64).sqrt();
        }
        mode_b.quality = 0.4;
        let n_a = (n as f64 * fraction_a).round() as usize;
        let mut samples = Vec::with_capacity(n);
        for i in 0..n {
            samples.push(if i < n_a { mode_a.clone() } else { mode_b.clone() });
        }
        (samples, mode_a, mode_b)
    }

    #[test]
    fn winner_exact_match_and_ties() {
        let mut r = crate::rng::stream(1, "wta");
        let mut pred = random_prediction(&mut r, 5);
        let mut gt = random_gt(&mut r);
        gt.q = pred.heads[2].q;
        assert_eq!(select_winner(&pred, &gt), 2);
        // Equidistant heads 0 and 3: tie resolves to 0.
        pred.heads[0].q = gt.q;
        pred.heads[3].q = gt.q;
        assert_eq!(select_winner(&pred, &gt), 0);
    }

    #[test]
    fn winner_matches_exhaustive_scan() {
        let mut r = crate::rng::stream(2, "wta-scan");
        for _ in 0..100 {
            let pred = random_prediction(&mut r, 7);
            let gt = random_gt(&mut r);
            let j = select_winner(&pred, &gt);
            let brute = (0..7)
                .min_by(|&a, &b| {
                    joint_distance(&pred.heads[a].q, &gt.q)
                        .partial_cmp(&joint_distance(&pred.heads[b].q, &gt.q))
                        .unwrap()
                })
                .unwrap();
            assert_eq!(j, brute);
        }
    }

    #[test]
    fn exact_match_with_confident_logit_has_zero_loss() {
        let mut pred = MultiHeadPrediction::zeros(5);
        pred.heads[1].logit = 60.0;
        let mut gt = GroundTruthGrasp {
            q: [0.0; JOINT_DIM],
            pose_correction: [0.0; POSE_DIM],
            quality: 0.0,
        };
        // Make head 1 the winner by exact match.
        pred.heads[1].q = [0.3; JOINT_DIM];
        gt.q = [0.3; JOINT_DIM];
        let b = compute_losses(&pred, &gt, &LossWeights::default()).unwrap();
        assert_eq!(b.winner, 1);
        assert_eq!(b.joint, 0.0);
        assert_eq!(b.quality, 0.0);
        assert_eq!(b.pose, 0.0);
        assert!(b.class < 1e-9);
        assert!(b.total < 1e-9);
    }

    #[test]
    fn uniform_logits_give_ln5() {
        let pred = MultiHeadPrediction::zeros(5);
        let gt = GroundTruthGrasp {
            q: [0.0; JOINT_DIM],
            pose_correction: [0.0; POSE_DIM],
            quality: 0.0,
        };
        let b = compute_losses(&pred, &gt, &LossWeights::default()).unwrap();
        assert!((b.class - 5.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn joint_loss_is_the_euclidean_norm() {
        let mut r = crate::rng::stream(3, "norm");
        for _ in 0..20 {
            let pred = random_prediction(&mut r, 5);
            let gt = random_gt(&mut r);
            let b = compute_losses(&pred, &gt, &LossWeights::default()).unwrap();
            let direct: f64 = pred.heads[b.winner]
                .q
                .iter()
                .zip(&gt.q)
                .map(|(a, c)| (a - c) * (a - c))
                .sum::<f64>()
                .sqrt();
            assert_eq!(b.joint, direct);
            assert_eq!(
                b.total,
                b.joint + b.quality + b.pose + b.class
            );
        }
    }

    #[test]
    fn non_finite_inputs_error() {
        let mut pred = MultiHeadPrediction::zeros(3);
        pred.heads[1].quality = f64::NAN;
        let gt = GroundTruthGrasp {
            q: [0.0; JOINT_DIM],
            pose_correction: [0.0; POSE_DIM],
            quality: 0.0,
        };
        assert!(matches!(
            compute_losses(&pred, &gt, &LossWeights::default()),
            Err(CoreError::NonFinite(_))
        ));
    }

    #[test]
    fn softmax_probabilities_are_a_distribution() {
        let logits = [0.3, -2.0, 5.0, 0.0, 1.5];
        let p = softmax(&logits);
        for v in &p {
            assert!(*v > 0.0 && *v < 1.0);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        // Shift invariance of the class loss.
        let shifted: Vec<f64> = logits.iter().map(|l| l + 7.3).collect();
        let ps = softmax(&shifted);
        for (a, b) in p.iter().zip(&ps) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_winner_gradients_are_exactly_zero() {
        let mut r = crate::rng::stream(4, "grad0");
        let pred = random_prediction(&mut r, 5);
        let gt = random_gt(&mut r);
        let (b, grads) = loss_gradients(&pred, &gt, &LossWeights::default()).unwrap();
        for (k, g) in grads.iter().enumerate() {
            if k != b.winner {
                assert_eq!(g.q, [0.0; JOINT_DIM]);
                assert_eq!(g.pose_correction, [0.0; POSE_DIM]);
                assert_eq!(g.quality, 0.0);
            }
        }
        // Softmax cross-entropy logit gradients sum to zero.
        let sum: f64 = grads.iter().map(|g| g.logit).sum();
        assert!(sum.abs() < 1e-12);
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        let mut r = crate::rng::stream(5, "fd");
        let weights = LossWeights::default();
        let h = 1e-5;
        for _ in 0..100 {
            let pred = random_prediction(&mut r, 5);
            let gt = random_gt(&mut r);
            let (_, grads) = loss_gradients(&pred, &gt, &weights).unwrap();
            let f = |p: &MultiHeadPrediction| compute_losses(p, &gt, &weights).unwrap().total;

            let check = |get: &dyn Fn(&mut MultiHeadPrediction) -> &mut f64, analytic: f64| {
                let mut plus = pred.clone();
                *get(&mut plus) += h;
                let mut minus = pred.clone();
                *get(&mut minus) -= h;
                let fd = (f(&plus) - f(&minus)) / (2.0 * h);
                let denom = analytic.abs().max(fd.abs()).max(1e-6);
                assert!(
                    (fd - analytic).abs() / denom <= 1e-4,
                    "fd {fd} vs analytic {analytic}"
                );
            };

            for k in 0..5 {
                for i in 0..JOINT_DIM {
                    let a = grads[k].q[i];
                    check(&|p: &mut MultiHeadPrediction| &mut p.heads[k].q[i], a);
                }
                for i in 0..POSE_DIM {
                    let a = grads[k].pose_correction[i];
                    check(
                        &|p: &mut MultiHeadPrediction| &mut p.heads[k].pose_correction[i],
                        a,
                    );
                }
                let a = grads[k].quality;
                check(&|p: &mut MultiHeadPrediction| &mut p.heads[k].quality, a);
                let a = grads[k].logit;
                check(&|p: &mut MultiHeadPrediction| &mut p.heads[k].logit, a);
            }
        }
    }

    #[test]
    fn wta_locality_ignores_non_winner_perturbations() {
        let mut r = crate::rng::stream(6, "local");
        let pred = random_prediction(&mut r, 5);
        let gt = random_gt(&mut r);
        let weights = LossWeights::default();
        let base = compute_losses(&pred, &gt, &weights).unwrap();
        let loser = (base.winner + 1) % 5;
        let mut perturbed = pred.clone();
        // Small enough not to steal the win.
        perturbed.heads[loser].q[3] += 1e-6;
        perturbed.heads[loser].quality += 0.3;
        perturbed.heads[loser].pose_correction[0] -= 0.2;
        let after = compute_losses(&perturbed, &gt, &weights).unwrap();
        assert_eq!(after.winner, base.winner);
        assert_eq!(after.total, base.total);
    }

    #[test]
    fn inference_selects_largest_logit() {
        let mut pred = MultiHeadPrediction::zeros(5);
        let logits = [0.1, 3.0, -1.0, 0.0, 0.0];
        for (h, l) in pred.heads.iter_mut().zip(logits) {
            h.logit = l;
            h.quality = l; // marker
        }
        assert_eq!(select_inference(&pred).quality, 3.0);
        // All equal: lowest index.
        let pred = MultiHeadPrediction::zeros(5);
        assert!(std::ptr::eq(select_inference(&pred), &pred.heads[0]));
    }

    #[test]
    fn fit_recovers_two_modes_with_matching_masses() {
        let (samples, mode_a, mode_b) = two_mode_dataset(100, 0.7);
        let fit = fit_modes(&samples, 5, 20_000, 6e-3, 11).unwrap();
        let heads = &fit.prediction.heads;
        let masses = softmax(&heads.iter().map(|h| h.logit).collect::<Vec<_>>());

        let near = |target: &GroundTruthGrasp| {
            (0..heads.len())
                .min_by(|&a, &b| {
                    joint_distance(&heads[a].q, &target.q)
                        .partial_cmp(&joint_distance(&heads[b].q, &target.q))
                        .unwrap()
                })
                .unwrap()
        };
        let ha = near(&mode_a);
        let hb = near(&mode_b);
        assert_ne!(ha, hb);
        assert!(joint_distance(&heads[ha].q, &mode_a.q) < 1e-2);
        assert!(joint_distance(&heads[hb].q, &mode_b.q) < 1e-2);
        assert!((masses[ha] - 0.7).abs() < 0.05, "mass A {}", masses[ha]);
        assert!((masses[hb] - 0.3).abs() < 0.05, "mass B {}", masses[hb]);
        // Inference picks the dominant mode.
        let chosen = select_inference(&fit.prediction);
        assert!(joint_distance(&chosen.q, &mode_a.q) < 1e-2);
        // Quality/pose heads converge too.
        assert!((heads[ha].quality - mode_a.quality).abs() < 1e-2);
        assert!(pose_distance(&heads[ha].pose_correction, &mode_a.pose_correction) < 1e-2);
    }

    #[test]
    fn single_head_on_balanced_modes_lands_between_them() {
        // Balanced two-mode data: the single head's unsquared-norm pulls
        // cancel anywhere on the segment, so it stays at its mean
        // initialization - the mode-mixing failure of single-output
        // regression.
        let (samples, mode_a, mode_b) = two_mode_dataset(100, 0.5);
        let fit = fit_modes(&samples, 1, 3000, 2e-3, 13).unwrap();
        let head = &fit.prediction.heads[0];
        let separation = joint_distance(&mode_a.q, &mode_b.q);
        let da = joint_distance(&head.q, &mode_a.q);
        let db = joint_distance(&head.q, &mode_b.q);
        assert!(
            da >= 0.4 * separation && db >= 0.4 * separation,
            "da {da} db {db} separation {separation}"
        );
    }

    #[test]
    fn single_head_on_imbalanced_modes_collapses_to_the_majority() {
        // With a 70/30 imbalance, the mean-loss minimizer is the geometric
        // median: the majority mode itself.
        let (samples, mode_a, mode_b) = two_mode_dataset(100, 0.7);
        let fit = fit_modes(&samples, 1, 3000, 2e-3, 17).unwrap();
        let head = &fit.prediction.heads[0];
        assert!(joint_distance(&head.q, &mode_a.q) < 2e-2);
        assert!(joint_distance(&head.q, &mode_b.q) > 0.9);
    }

    #[test]
    fn single_sample_pair_converges_toward_zero_loss() {
        let gt = GroundTruthGrasp {
            q: [0.3; JOINT_DIM],
            pose_correction: [-0.1; POSE_DIM],
            quality: 0.6,
        };
        let samples = vec![gt.clone(), gt.clone()];
        // One head: the class term is identically zero and the winner is
        // fixed, so the loss goes to zero outright.
        let fit = fit_modes(&samples, 1, 4000, 2e-3, 3).unwrap();
        let b = compute_losses(&fit.prediction, &gt, &LossWeights::default()).unwrap();
        assert!(b.total < 1e-6, "final loss {}", b.total);
        // Monotone up to the subgradient oscillation bound: joint, pose, and
        // quality terms each move at most one step per iteration.
        for w in fit.history.windows(2) {
            assert!(w[1] <= w[0] + 4.0 * 2e-3, "{} -> {}", w[0], w[1]);
        }

        // With multiple heads the regression terms still vanish; the
        // cross-entropy term decays toward zero at the logarithmic rate
        // inherent to a hard 1.0 target.
        let fit = fit_modes(&samples, 2, 4000, 2e-3, 3).unwrap();
        let b = compute_losses(&fit.prediction, &gt, &LossWeights::default()).unwrap();
        assert!(b.joint < 1e-6 && b.quality < 1e-6 && b.pose < 1e-6);
        let first = fit.history[0];
        let last = *fit.history.last().unwrap();
        assert!(last < 0.25 * first, "loss {first} -> {last}");
    }

    #[test]
    fn absurd_step_size_diverges_with_diagnostic() {
        let (samples, _, _) = two_mode_dataset(20, 0.5);
        assert!(matches!(
            fit_modes(&samples, 3, 50, 1e6, 1),
            Err(CoreError::Diverged(_))
        ));
    }

    #[test]
    fn history_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("history.csv");
        write_history_csv(&p, &[1.0, 0.5, 0.25]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("step,loss\n0,1\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
