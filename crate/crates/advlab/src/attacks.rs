//! Gradient-sign adversarial example generators.
//!
//! Three full-knowledge methods share one epsilon-ball projection:
//!
//! * fast gradient sign: `adv = clip01(x + eps * sign(grad_x C(x, y_true)))`
//!   from a single backward pass;
//! * iterative non-targeted: `x_{n+1} = clamp(x_n + alpha * sign(grad_x
//!   C(x_n, y_true)))`, raising the true-class cost step by step;
//! * iterative targeted: `x_{n+1} = clamp(x_n - alpha * sign(grad_x
//!   C(x_n, y_target)))`, descending the cost of a chosen wrong class.
//!
//! The clamp keeps every pixel within `eps` of the original and inside
//! [0, 1]. All generators are pure: identical inputs give bit-identical
//! outcomes.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datasets::LabeledImage;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::rng::SplitMix64;
use crate::tensor::{argmax, box_clamp, Tensor};

/// Step size default: one 8-bit intensity level per iteration on the
/// [0, 1] pixel scale.
pub const DEFAULT_ALPHA: f64 = 1.0 / 255.0;

/// Iteration count default for the iterative methods.
pub const DEFAULT_ITERATIONS: usize = 10;

/// The three generation methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMethod {
    #[serde(rename = "fgsm")]
    FastGradientSign,
    #[serde(rename = "iterative")]
    IterativeNontargeted,
    #[serde(rename = "targeted")]
    IterativeTargeted,
}

impl AttackMethod {
    pub const ALL: [AttackMethod; 3] = [
        AttackMethod::FastGradientSign,
        AttackMethod::IterativeNontargeted,
        AttackMethod::IterativeTargeted,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AttackMethod::FastGradientSign => "fgsm",
            AttackMethod::IterativeNontargeted => "iterative",
            AttackMethod::IterativeTargeted => "targeted",
        }
    }
}

impl fmt::Display for AttackMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<AttackMethod> {
        match s {
            "fgsm" => Ok(AttackMethod::FastGradientSign),
            "iterative" => Ok(AttackMethod::IterativeNontargeted),
            "targeted" => Ok(AttackMethod::IterativeTargeted),
            other => Err(Error::arg(format!(
                "unknown attack method {other:?} (expected fgsm, iterative, or targeted)"
            ))),
        }
    }
}

/// How the targeted method picks its class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSelection {
    /// No target; only valid for the non-targeted methods.
    None,
    /// Uniform over all classes except the true label, from this seed.
    Random { seed: u64 },
    /// A fixed class index.
    Fixed(usize),
}

/// Full attack parameterization. Epsilon and alpha are in [0, 1] pixel
/// units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub method: AttackMethod,
    pub epsilon: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub target: TargetSelection,
}

impl AttackConfig {
    pub fn fgsm(epsilon: f64) -> AttackConfig {
        AttackConfig {
            method: AttackMethod::FastGradientSign,
            epsilon,
            alpha: DEFAULT_ALPHA,
            iterations: 1,
            target: TargetSelection::None,
        }
    }

    pub fn iterative(epsilon: f64, alpha: f64, iterations: usize) -> AttackConfig {
        AttackConfig {
            method: AttackMethod::IterativeNontargeted,
            epsilon,
            alpha,
            iterations,
            target: TargetSelection::None,
        }
    }

    pub fn targeted(
        epsilon: f64,
        alpha: f64,
        iterations: usize,
        target: TargetSelection,
    ) -> AttackConfig {
        AttackConfig {
            method: AttackMethod::IterativeTargeted,
            epsilon,
            alpha,
            iterations,
            target,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epsilon < 0.0 || !self.epsilon.is_finite() {
            return Err(Error::arg(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        if self.alpha <= 0.0 || !self.alpha.is_finite() {
            return Err(Error::arg(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.method == AttackMethod::IterativeTargeted
            && self.target == TargetSelection::None
        {
            return Err(Error::arg("targeted attack requires a target selection"));
        }
        Ok(())
    }
}

/// Everything recorded about one generated adversarial example.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub original: LabeledImage,
    pub adversarial: Tensor,
    pub clean_probs: Tensor,
    pub adv_probs: Tensor,
    pub target: Option<usize>,
    pub linf_norm: f64,
    pub iterations_run: usize,
    pub success_flipped_top1: bool,
    pub success_hit_target: Option<bool>,
}

/// Gradient access used by the generators. Concrete attacks run against a
/// [`Network`]; tests substitute counting shims to audit backward passes.
pub(crate) trait GradOracle {
    fn class_count(&self) -> usize;
    fn probs(&self, x: &Tensor) -> Result<Tensor>;
    fn cost_input_grad(&self, x: &Tensor, y: usize) -> Result<Tensor>;
}

impl GradOracle for Network {
    fn class_count(&self) -> usize {
        self.class_count()
    }

    fn probs(&self, x: &Tensor) -> Result<Tensor> {
        self.forward_probs(x, 1.0)
    }

    fn cost_input_grad(&self, x: &Tensor, y: usize) -> Result<Tensor> {
        Ok(self.input_gradient(x, y)?.input_grad)
    }
}

/// Clips `candidate` into the intersection of the L-inf ball of radius
/// `epsilon` around `original` and the valid pixel range [0, 1].
pub fn epsilon_clamp(candidate: &Tensor, original: &Tensor, epsilon: f64) -> Result<Tensor> {
    if candidate.shape() != original.shape() {
        return Err(Error::shape(
            original.shape().dims(),
            candidate.shape().dims(),
            "epsilon_clamp",
        ));
    }
    if epsilon < 0.0 || !epsilon.is_finite() {
        return Err(Error::arg(format!(
            "epsilon must be non-negative, got {epsilon}"
        )));
    }
    let lo = original.map(|v| (v - epsilon).max(0.0));
    let hi = original.map(|v| (v + epsilon).min(1.0));
    box_clamp(candidate, &lo, &hi)
}

/// Fast gradient sign method: one backward pass, one signed step of size
/// `epsilon`, then a range clip to valid pixels.
pub fn fgsm(net: &Network, item: &LabeledImage, epsilon: f64) -> Result<AttackOutcome> {
    fgsm_impl(net, item, epsilon)
}

pub(crate) fn fgsm_impl<O: GradOracle>(
    oracle: &O,
    item: &LabeledImage,
    epsilon: f64,
) -> Result<AttackOutcome> {
    let cfg = AttackConfig::fgsm(epsilon);
    cfg.validate()?;
    let x = &item.pixels;
    let grad = oracle.cost_input_grad(x, item.label)?;
    let candidate = x.add(&grad.sign().scale(epsilon))?;
    let zero = Tensor::from_vec(vec![0.0])?;
    let one = Tensor::from_vec(vec![1.0])?;
    let adversarial = box_clamp(&candidate, &zero, &one)?;
    finish(oracle, item, adversarial, None, 1)
}

/// Iterated non-targeted method: `iterations` signed ascent steps on the
/// true-class cost, each followed by the epsilon-ball clamp.
pub fn iterative_nontargeted(
    net: &Network,
    item: &LabeledImage,
    cfg: &AttackConfig,
) -> Result<AttackOutcome> {
    iterative_nontargeted_impl(net, item, cfg)
}

pub(crate) fn iterative_nontargeted_impl<O: GradOracle>(
    oracle: &O,
    item: &LabeledImage,
    cfg: &AttackConfig,
) -> Result<AttackOutcome> {
    if cfg.method != AttackMethod::IterativeNontargeted {
        return Err(Error::arg(format!(
            "config method is {}, expected iterative",
            cfg.method
        )));
    }
    cfg.validate()?;
    let x = &item.pixels;
    let mut current = x.clone();
    for _ in 0..cfg.iterations {
        let grad = oracle.cost_input_grad(&current, item.label)?;
        let candidate = current.add(&grad.sign().scale(cfg.alpha))?;
        current = epsilon_clamp(&candidate, x, cfg.epsilon)?;
    }
    finish(oracle, item, current, None, cfg.iterations)
}

/// Iterated targeted method: signed descent on the target-class cost,
/// clamped each step. The target comes from `cfg.target`.
pub fn iterative_targeted(
    net: &Network,
    item: &LabeledImage,
    cfg: &AttackConfig,
) -> Result<AttackOutcome> {
    iterative_targeted_impl(net, item, cfg)
}

pub(crate) fn iterative_targeted_impl<O: GradOracle>(
    oracle: &O,
    item: &LabeledImage,
    cfg: &AttackConfig,
) -> Result<AttackOutcome> {
    if cfg.method != AttackMethod::IterativeTargeted {
        return Err(Error::arg(format!(
            "config method is {}, expected targeted",
            cfg.method
        )));
    }
    cfg.validate()?;
    let class_count = oracle.class_count();
    let target = match cfg.target {
        TargetSelection::None => unreachable!("validate rejects None for targeted"),
        TargetSelection::Fixed(c) => {
            if c >= class_count {
                return Err(Error::arg(format!(
                    "target class {c} out of range for {class_count} classes"
                )));
            }
            c
        }
        TargetSelection::Random { seed } => pick_random_target(seed, class_count, item.label)?,
    };
    let x = &item.pixels;
    let mut current = x.clone();
    for _ in 0..cfg.iterations {
        let grad = oracle.cost_input_grad(&current, target)?;
        let candidate = current.sub(&grad.sign().scale(cfg.alpha))?;
        current = epsilon_clamp(&candidate, x, cfg.epsilon)?;
    }
    finish(oracle, item, current, Some(target), cfg.iterations)
}

/// Runs whichever method `cfg` names.
pub fn attack(net: &Network, item: &LabeledImage, cfg: &AttackConfig) -> Result<AttackOutcome> {
    match cfg.method {
        AttackMethod::FastGradientSign => fgsm(net, item, cfg.epsilon),
        AttackMethod::IterativeNontargeted => iterative_nontargeted(net, item, cfg),
        AttackMethod::IterativeTargeted => iterative_targeted(net, item, cfg),
    }
}

/// Uniform draw over all classes except `y_true`, deterministic in `seed`.
pub fn pick_random_target(seed: u64, class_count: usize, y_true: usize) -> Result<usize> {
    if class_count < 2 {
        return Err(Error::arg("random target needs at least 2 classes"));
    }
    if y_true >= class_count {
        return Err(Error::arg(format!(
            "true label {y_true} out of range for {class_count} classes"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let r = rng.below(class_count - 1);
    Ok(if r < y_true { r } else { r + 1 })
}

fn finish<O: GradOracle>(
    oracle: &O,
    item: &LabeledImage,
    adversarial: Tensor,
    target: Option<usize>,
    iterations_run: usize,
) -> Result<AttackOutcome> {
    let clean_probs = oracle.probs(&item.pixels)?;
    let adv_probs = oracle.probs(&adversarial)?;
    let clean_top = argmax(&clean_probs)?;
    let adv_top = argmax(&adv_probs)?;
    let linf_norm = adversarial.linf_distance(&item.pixels)?;
    Ok(AttackOutcome {
        success_flipped_top1: adv_top != clean_top,
        success_hit_target: target.map(|t| adv_top == t),
        original: item.clone(),
        adversarial,
        clean_probs,
        adv_probs,
        target,
        linf_norm,
        iterations_run,
    })
}

/// Encodes an image as binary PGM (P5) for one channel or PPM (P6) for
/// three, with pixel = round(255 * v).
pub fn pnm_bytes(image: &Tensor) -> Result<Vec<u8>> {
    let dims = image.shape().dims();
    let (h, w, c) = match dims {
        [h, w, c @ (1 | 3)] => (*h, *w, *c),
        _ => {
            return Err(Error::arg(format!(
                "PNM export needs (h, w, 1) or (h, w, 3) images, got shape {dims:?}"
            )))
        }
    };
    let magic = if c == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    for &v in image.data() {
        out.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
    }
    Ok(out)
}

pub fn write_pnm(image: &Tensor, path: &Path) -> Result<()> {
    std::fs::write(path, pnm_bytes(image)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{baseline_cnn, LayerSpec, Network};
    use crate::rng::derive_seed;
    use crate::tensor::Shape;
    use std::cell::Cell;

    fn tiny_net(seed: u64) -> Network {
        Network::new(
            &Shape::new(vec![6, 6, 1]).unwrap(),
            vec![
                LayerSpec::Conv2d {
                    out_channels: 2,
                    kernel_size: 3,
                    stride: 1,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool2x2,
                LayerSpec::Flatten,
                LayerSpec::Dense { out_features: 4 },
            ],
            4,
            seed,
        )
        .unwrap()
    }

    fn tiny_item(seed: u64) -> LabeledImage {
        let mut rng = SplitMix64::new(seed);
        let shape = Shape::new(vec![6, 6, 1]).unwrap();
        let data: Vec<f64> = (0..36).map(|_| rng.next_f64()).collect();
        LabeledImage {
            pixels: Tensor::new(shape, data).unwrap(),
            label: 1,
        }
    }

    struct CountingOracle<'a> {
        inner: &'a Network,
        grad_calls: Cell<usize>,
    }

    impl GradOracle for CountingOracle<'_> {
        fn class_count(&self) -> usize {
            self.inner.class_count()
        }

        fn probs(&self, x: &Tensor) -> Result<Tensor> {
            self.inner.probs(x)
        }

        fn cost_input_grad(&self, x: &Tensor, y: usize) -> Result<Tensor> {
            self.grad_calls.set(self.grad_calls.get() + 1);
            self.inner.cost_input_grad(x, y)
        }
    }

    #[test]
    fn epsilon_clamp_keeps_interior_points() {
        let original = Tensor::from_vec(vec![0.5, 0.5]).unwrap();
        let candidate = Tensor::from_vec(vec![0.52, 0.48]).unwrap();
        let out = epsilon_clamp(&candidate, &original, 0.05).unwrap();
        assert_eq!(out, candidate);
    }

    #[test]
    fn epsilon_clamp_projects_to_upper_face() {
        let eps = 0.1;
        let original = Tensor::from_vec(vec![0.3, 0.5, 0.7]).unwrap();
        let candidate = original.map(|v| v + 2.0 * eps);
        let out = epsilon_clamp(&candidate, &original, eps).unwrap();
        for (o, r) in original.data().iter().zip(out.data()) {
            assert_eq!(*r, o + eps);
        }
    }

    #[test]
    fn epsilon_clamp_matches_nested_min_max_oracle() {
        let mut rng = SplitMix64::new(55);
        for _ in 0..1000 {
            let orig = rng.next_f64();
            let cand = rng.uniform(-0.5, 1.5);
            let eps = rng.uniform(0.0, 0.4);
            let out = epsilon_clamp(
                &Tensor::from_vec(vec![cand]).unwrap(),
                &Tensor::from_vec(vec![orig]).unwrap(),
                eps,
            )
            .unwrap();
            let expected = cand.max((orig - eps).max(0.0)).min((orig + eps).min(1.0));
            assert_eq!(out.data()[0], expected);
        }
    }

    #[test]
    fn epsilon_clamp_rejects_shape_mismatch() {
        let a = Tensor::from_vec(vec![0.5]).unwrap();
        let b = Tensor::from_vec(vec![0.5, 0.5]).unwrap();
        assert!(epsilon_clamp(&a, &b, 0.1).is_err());
    }

    #[test]
    fn fgsm_zero_epsilon_returns_input_bitwise() {
        let net = tiny_net(1);
        let item = tiny_item(2);
        let out = fgsm(&net, &item, 0.0).unwrap();
        assert_eq!(out.adversarial.data(), item.pixels.data());
        assert_eq!(out.linf_norm, 0.0);
    }

    #[test]
    fn fgsm_steps_are_signed_epsilon_multiples() {
        let net = tiny_net(3);
        // Interior pixels so the [0, 1] clip never bites.
        let mut rng = SplitMix64::new(9);
        let shape = Shape::new(vec![6, 6, 1]).unwrap();
        let data: Vec<f64> = (0..36).map(|_| rng.uniform(0.3, 0.7)).collect();
        let item = LabeledImage {
            pixels: Tensor::new(shape, data).unwrap(),
            label: 0,
        };
        let eps = 0.05;
        let out = fgsm(&net, &item, eps).unwrap();
        for (a, o) in out.adversarial.data().iter().zip(item.pixels.data()) {
            // Each pixel is exactly one of the three signed-step candidates.
            assert!(
                *a == *o || *a == o + eps || *a == o - eps,
                "pixel {a} not a signed-epsilon step from {o}"
            );
        }
    }

    #[test]
    fn fgsm_uses_exactly_one_gradient_call() {
        let net = tiny_net(4);
        let oracle = CountingOracle {
            inner: &net,
            grad_calls: Cell::new(0),
        };
        fgsm_impl(&oracle, &tiny_item(5), 0.1).unwrap();
        assert_eq!(oracle.grad_calls.get(), 1);
    }

    #[test]
    fn iterative_methods_use_exactly_n_gradient_calls() {
        let net = tiny_net(4);
        let item = tiny_item(5);
        for n in [0, 1, 7] {
            let oracle = CountingOracle {
                inner: &net,
                grad_calls: Cell::new(0),
            };
            let cfg = AttackConfig::iterative(0.1, DEFAULT_ALPHA, n);
            let out = iterative_nontargeted_impl(&oracle, &item, &cfg).unwrap();
            assert_eq!(oracle.grad_calls.get(), n);
            assert_eq!(out.iterations_run, n);

            let oracle = CountingOracle {
                inner: &net,
                grad_calls: Cell::new(0),
            };
            let cfg = AttackConfig::targeted(0.1, DEFAULT_ALPHA, n, TargetSelection::Fixed(2));
            let out = iterative_targeted_impl(&oracle, &item, &cfg).unwrap();
            assert_eq!(oracle.grad_calls.get(), n);
            assert_eq!(out.iterations_run, n);
        }
    }

    #[test]
    fn zero_iterations_is_identity() {
        let net = tiny_net(6);
        let item = tiny_item(7);
        let cfg = AttackConfig::iterative(0.2, DEFAULT_ALPHA, 0);
        let out = iterative_nontargeted(&net, &item, &cfg).unwrap();
        assert_eq!(out.adversarial.data(), item.pixels.data());

        let cfg = AttackConfig::targeted(0.2, DEFAULT_ALPHA, 0, TargetSelection::Fixed(0));
        let out = iterative_targeted(&net, &item, &cfg).unwrap();
        assert_eq!(out.adversarial.data(), item.pixels.data());
    }

    #[test]
    fn iterates_stay_inside_the_ball_at_every_step() {
        let net = tiny_net(8);
        let item = tiny_item(9);
        let eps = 0.03;
        // Re-run with increasing iteration counts; each prefix is a step.
        for n in 1..=8 {
            let cfg = AttackConfig::iterative(eps, 0.02, n);
            let out = iterative_nontargeted(&net, &item, &cfg).unwrap();
            assert!(out.linf_norm <= eps + f64::EPSILON);
            assert!(out
                .adversarial
                .data()
                .iter()
                .all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn targeted_requires_a_target() {
        let net = tiny_net(10);
        let cfg = AttackConfig {
            method: AttackMethod::IterativeTargeted,
            epsilon: 0.1,
            alpha: DEFAULT_ALPHA,
            iterations: 3,
            target: TargetSelection::None,
        };
        assert!(iterative_targeted(&net, &tiny_item(11), &cfg).is_err());
    }

    #[test]
    fn attacks_are_deterministic() {
        let net = tiny_net(12);
        let item = tiny_item(13);
        let cfg = AttackConfig::targeted(0.1, DEFAULT_ALPHA, 5, TargetSelection::Random { seed: 3 });
        let a = attack(&net, &item, &cfg).unwrap();
        let b = attack(&net, &item, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn adversarial_points_nest_into_larger_balls() {
        let net = tiny_net(14);
        let item = tiny_item(15);
        let eps1 = 0.05;
        let out = attack(&net, &item, &AttackConfig::iterative(eps1, 0.02, 6)).unwrap();
        for eps2 in [eps1, 0.08, 0.3] {
            let reclamped = epsilon_clamp(&out.adversarial, &item.pixels, eps2).unwrap();
            assert_eq!(reclamped, out.adversarial, "eps2 {eps2}");
        }
    }

    #[test]
    fn random_target_two_classes_is_forced() {
        assert_eq!(pick_random_target(42, 2, 0).unwrap(), 1);
        assert_eq!(pick_random_target(43, 2, 1).unwrap(), 0);
    }

    #[test]
    fn random_target_never_hits_true_class() {
        for i in 0..10_000u64 {
            let t = pick_random_target(derive_seed(7, i), 10, 4).unwrap();
            assert_ne!(t, 4);
            assert!(t < 10);
        }
    }

    #[test]
    fn random_target_is_near_uniform() {
        let mut counts = [0usize; 10];
        let draws = 100_000u64;
        for i in 0..draws {
            counts[pick_random_target(derive_seed(99, i), 10, 3).unwrap()] += 1;
        }
        assert_eq!(counts[3], 0);
        for (c, &count) in counts.iter().enumerate() {
            if c == 3 {
                continue;
            }
            let freq = count as f64 / draws as f64;
            assert!(
                (freq - 1.0 / 9.0).abs() <= 0.01,
                "class {c} frequency {freq}"
            );
        }
    }

    #[test]
    fn pnm_bytes_encodes_grayscale_and_rgb() {
        let gray = Tensor::new(
            Shape::new(vec![1, 2, 1]).unwrap(),
            vec![0.0, 1.0],
        )
        .unwrap();
        assert_eq!(pnm_bytes(&gray).unwrap(), b"P5\n2 1\n255\n\x00\xff");

        let rgb = Tensor::new(
            Shape::new(vec![1, 1, 3]).unwrap(),
            vec![0.0, 0.5, 1.0],
        )
        .unwrap();
        assert_eq!(pnm_bytes(&rgb).unwrap(), b"P6\n1 1\n255\n\x00\x80\xff");

        let bad = Tensor::new(Shape::new(vec![1, 1, 2]).unwrap(), vec![0.0, 0.0]).unwrap();
        assert!(pnm_bytes(&bad).is_err());
    }

    #[test]
    fn baseline_cnn_accepts_28x28() {
        let net = Network::new(
            &Shape::new(vec![28, 28, 1]).unwrap(),
            baseline_cnn(10),
            10,
            0,
        )
        .unwrap();
        // conv(8,3): 72+8, conv(16,3): 1152+16, dense(10): 400*10+10.
        assert_eq!(net.param_count(), 72 + 8 + 1152 + 16 + 4000 + 10);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn every_method_respects_the_epsilon_ball(
                net_seed in 0u64..50,
                img_seed in 0u64..50,
                method_idx in 0usize..3,
                eps in 0.0f64..0.3,
            ) {
                let net = tiny_net(net_seed);
                let item = tiny_item(img_seed);
                let method = AttackMethod::ALL[method_idx];
                let cfg = AttackConfig {
                    method,
                    epsilon: eps,
                    alpha: DEFAULT_ALPHA,
                    iterations: 4,
                    target: TargetSelection::Random { seed: img_seed },
                };
                let out = attack(&net, &item, &cfg).unwrap();
                prop_assert!(out.linf_norm <= eps + (1.0 + eps) * f64::EPSILON);
                prop_assert!(out.adversarial.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }
}
