//! RSU-side credibility of swarm groups.
//!
//! Each group's upload history is a Beta(p, q) posterior over positive
//! behavior: an upload that beats the current global model on the RSU test
//! batch counts toward p, anything else toward q. The aggregation weight
//! combines the posterior mean (effectiveness) with a group-size robustness
//! term and is normalized across groups.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SfdlError};

/// Floor applied to the robustness term so singleton groups keep a nonzero
/// aggregation weight under the product rule.
pub const ROBUSTNESS_FLOOR: f64 = 0.01;

/// Per-group reputation state held at an RSU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibilityState {
    /// Accumulated positive behavior plus prior.
    pub p: f64,
    /// Accumulated negative behavior plus prior.
    pub q: f64,
    /// Current group size n.
    pub group_size: usize,
    /// Max group size k among all groups this round.
    pub max_group_size: usize,
}

impl CredibilityState {
    /// Fresh state at the uniform Beta(1, 1) prior.
    pub fn new(group_size: usize, max_group_size: usize) -> Result<Self> {
        if group_size < 1 {
            return Err(SfdlError::invalid("group_size must be >= 1"));
        }
        if max_group_size < group_size {
            return Err(SfdlError::invalid("max_group_size must be >= group_size"));
        }
        Ok(Self {
            p: 1.0,
            q: 1.0,
            group_size,
            max_group_size,
        })
    }

    /// Record one behavior classification: positive deltas increment p,
    /// non-positive ones increment q.
    pub fn observe(&self, delta: f64) -> Self {
        let mut next = *self;
        if delta > 0.0 {
            next.p += 1.0;
        } else {
            next.q += 1.0;
        }
        next
    }

    /// Posterior mean p / (p + q): the predicted validity of the next upload.
    pub fn effectiveness(&self) -> f64 {
        self.p / (self.p + self.q)
    }

    /// Group-size robustness term for this state.
    pub fn robustness(&self) -> Result<f64> {
        robustness(self.group_size, self.max_group_size)
    }
}

/// Robustness of a group of `n` vehicles when the largest group has `k`:
/// `log_k n`, with the base clamped to at least 2 and the result floored at
/// [`ROBUSTNESS_FLOOR`].
pub fn robustness(n: usize, k: usize) -> Result<f64> {
    if n < 1 || k < 1 {
        return Err(SfdlError::invalid("group sizes must be >= 1"));
    }
    if n > k {
        return Err(SfdlError::invalid(format!(
            "group size {n} exceeds max group size {k}"
        )));
    }
    let raw = (n as f64).ln() / (k.max(2) as f64).ln();
    Ok(raw.max(ROBUSTNESS_FLOOR))
}

/// Relative loss improvement of a received model over the global model on
/// the RSU test batch: `(global - received) / global`. Positive means the
/// received model is better. Returns `None` for a degenerate comparison
/// (global loss not strictly positive), which callers treat as no-update.
pub fn effectiveness_delta(global_loss: f64, received_loss: f64) -> Option<f64> {
    if global_loss <= 0.0 || !global_loss.is_finite() || !received_loss.is_finite() {
        return None;
    }
    Some((global_loss - received_loss) / global_loss)
}

/// How robustness and effectiveness combine into the credibility score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CombinationRule {
    /// `C = C_b * C_e`: a group must be both large and historically
    /// effective to earn weight.
    #[default]
    Product,
    /// `C = (C_b + C_e) / 2`.
    Mean,
    /// `C = C_e`, ignoring group size.
    EffectivenessOnly,
}

impl std::fmt::Display for CombinationRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CombinationRule::Product => "product",
            CombinationRule::Mean => "mean",
            CombinationRule::EffectivenessOnly => "effectiveness-only",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for CombinationRule {
    type Err = SfdlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(CombinationRule::Product),
            "mean" => Ok(CombinationRule::Mean),
            "effectiveness-only" => Ok(CombinationRule::EffectivenessOnly),
            other => Err(SfdlError::Parse(format!(
                "unknown credibility rule '{other}' (expected product, mean, or effectiveness-only)"
            ))),
        }
    }
}

/// Credibility score of a group under the given combination rule.
pub fn credibility(state: &CredibilityState, rule: CombinationRule) -> Result<f64> {
    let c_b = state.robustness()?;
    let c_e = state.effectiveness();
    Ok(match rule {
        CombinationRule::Product => c_b * c_e,
        CombinationRule::Mean => 0.5 * (c_b + c_e),
        CombinationRule::EffectivenessOnly => c_e,
    })
}

/// Normalized aggregation weights, one per swarm group. Entries are
/// nonnegative and sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    /// Wrap weights that already satisfy the simplex invariants: every entry
    /// nonnegative, summing to 1 within 1e-9.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(SfdlError::invalid("weight vector cannot be empty"));
        }
        if weights.iter().any(|w| w.is_nan() || *w < 0.0) {
            return Err(SfdlError::invalid("weights must be nonnegative"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SfdlError::invalid(format!(
                "weights must sum to 1, got {sum}"
            )));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Normalize credibility scores into aggregation weights `C_i / sum(C)`.
pub fn normalize_weights(credibilities: &[f64]) -> Result<WeightVector> {
    if credibilities.is_empty() {
        return Err(SfdlError::invalid("cannot normalize an empty weight list"));
    }
    if let Some(bad) = credibilities.iter().find(|c| c.is_nan() || **c <= 0.0) {
        return Err(SfdlError::invalid(format!(
            "credibility must be > 0, got {bad}"
        )));
    }
    let total: f64 = credibilities.iter().sum();
    Ok(WeightVector {
        weights: credibilities.iter().map(|c| c / total).collect(),
    })
}

// Lanczos approximation, g = 7, n = 9.
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

/// Natural log of the Gamma function for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    use std::f64::consts::PI;
    if x < 0.5 {
        PI.ln() - (PI * x).sin().abs().ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS[0];
        for (i, c) in LANCZOS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + 7.5;
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

/// Beta(p, q) density at x in (0, 1).
pub fn beta_pdf(x: f64, p: f64, q: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 || x >= 1.0 {
        return Err(SfdlError::invalid(format!(
            "beta_pdf domain is (0, 1), got {x}"
        )));
    }
    if p.is_nan() || q.is_nan() || p <= 0.0 || q <= 0.0 {
        return Err(SfdlError::invalid("beta_pdf shape parameters must be > 0"));
    }
    let ln_beta = ln_gamma(p) + ln_gamma(q) - ln_gamma(p + q);
    Ok(((p - 1.0) * x.ln() + (q - 1.0) * (1.0 - x).ln() - ln_beta).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Composite Simpson quadrature over (0, 1); the independent oracle for
    /// the pdf normalization and mean.
    fn simpson(f: impl Fn(f64) -> f64, intervals: usize) -> f64 {
        let n = intervals * 2;
        let h = 1.0 / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let x = (i as f64 * h).clamp(1e-12, 1.0 - 1e-12);
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * f(x);
        }
        acc * h / 3.0
    }

    #[test]
    fn robustness_examples() {
        assert_eq!(robustness(10, 10).unwrap(), 1.0);
        assert_eq!(robustness(1, 7).unwrap(), ROBUSTNESS_FLOOR);
        assert!((robustness(4, 10).unwrap() - 4f64.ln() / 10f64.ln()).abs() < 1e-12);
        assert!((robustness(4, 10).unwrap() - 0.602).abs() < 1e-3);
        assert!(robustness(11, 10).is_err());
        assert!(robustness(0, 10).is_err());
        // degenerate base k = 1 clamps to 2
        assert_eq!(robustness(1, 1).unwrap(), ROBUSTNESS_FLOOR);
    }

    #[test]
    fn effectiveness_delta_examples() {
        assert_eq!(effectiveness_delta(2.0, 1.0), Some(0.5));
        assert_eq!(effectiveness_delta(3.0, 3.0), Some(0.0));
        assert_eq!(effectiveness_delta(1.0, 3.0), Some(-2.0));
        assert_eq!(effectiveness_delta(0.0, 1.0), None);
        assert_eq!(effectiveness_delta(-1.0, 1.0), None);
    }

    #[test]
    fn observe_updates_beta_parameters() {
        let prior = CredibilityState::new(3, 5).unwrap();
        assert_eq!((prior.p, prior.q), (1.0, 1.0));
        let pos = prior.observe(0.4);
        assert_eq!((pos.p, pos.q), (2.0, 1.0));
        let neg = prior.observe(-0.4);
        assert_eq!((neg.p, neg.q), (1.0, 2.0));
        // ties count as negative behavior
        let tie = prior.observe(0.0);
        assert_eq!((tie.p, tie.q), (1.0, 2.0));

        let mut state = prior;
        for _ in 0..4 {
            state = state.observe(1.0);
        }
        for _ in 0..2 {
            state = state.observe(-1.0);
        }
        assert_eq!((state.p, state.q), (5.0, 3.0));
    }

    #[test]
    fn effectiveness_examples() {
        let prior = CredibilityState::new(2, 4).unwrap();
        assert_eq!(prior.effectiveness(), 0.5);
        let mut s = prior;
        s.p = 3.0;
        s.q = 1.0;
        assert_eq!(s.effectiveness(), 0.75);
        let mut grown = s;
        grown.p = 4.0;
        assert!(grown.effectiveness() > s.effectiveness());
    }

    #[test]
    fn credibility_examples() {
        let equal = CredibilityState::new(8, 8).unwrap();
        assert!((credibility(&equal, CombinationRule::Product).unwrap() - 0.5).abs() < 1e-12);
        let singleton = CredibilityState::new(1, 8).unwrap();
        assert!((credibility(&singleton, CombinationRule::Product).unwrap() - 0.005).abs() < 1e-12);
        let mut seasoned = CredibilityState::new(8, 8).unwrap();
        seasoned.p = 99.0;
        seasoned.q = 1.0;
        assert!((credibility(&seasoned, CombinationRule::Product).unwrap() - 0.99).abs() < 1e-12);
        assert!(
            (credibility(&seasoned, CombinationRule::EffectivenessOnly).unwrap() - 0.99).abs()
                < 1e-12
        );
        assert!((credibility(&seasoned, CombinationRule::Mean).unwrap() - 0.995).abs() < 1e-12);
    }

    #[test]
    fn normalize_weight_examples() {
        let w = normalize_weights(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(w.weights(), &[0.25, 0.25, 0.25, 0.25]);
        let single = normalize_weights(&[0.5]).unwrap();
        assert_eq!(single.weights(), &[1.0]);
        let fixed = normalize_weights(&[0.6, 0.2, 0.2]).unwrap();
        for (a, b) in fixed.weights().iter().zip([0.6, 0.2, 0.2]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(normalize_weights(&[0.5, 0.0]).is_err());
        assert!(normalize_weights(&[]).is_err());
    }

    #[test]
    fn posterior_converges_monotonically() {
        let mut state = CredibilityState::new(2, 4).unwrap();
        let mut last = state.effectiveness();
        for t in 1..=30 {
            state = state.observe(1.0);
            let e = state.effectiveness();
            assert!(e > last);
            assert!((e - (1.0 + t as f64) / (2.0 + t as f64)).abs() < 1e-12);
            last = e;
        }
        let mut state = CredibilityState::new(2, 4).unwrap();
        let mut last = state.effectiveness();
        for t in 1..=30 {
            state = state.observe(-1.0);
            let e = state.effectiveness();
            assert!(e < last);
            assert!((e - 1.0 / (2.0 + t as f64)).abs() < 1e-12);
            last = e;
        }
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut factorial = 1.0f64;
        for n in 1..=10u32 {
            // Gamma(n) = (n-1)!
            assert!(
                (ln_gamma(n as f64) - factorial.ln()).abs() < 1e-10,
                "ln_gamma({n})"
            );
            factorial *= n as f64;
        }
        // Gamma(1/2) = sqrt(pi)
        assert!((ln_gamma(0.5) - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-10);
    }

    #[test]
    fn beta_pdf_examples() {
        for x in [0.1, 0.25, 0.5, 0.9] {
            assert!((beta_pdf(x, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
            assert!((beta_pdf(x, 2.0, 1.0).unwrap() - 2.0 * x).abs() < 1e-10);
        }
        assert!(beta_pdf(0.0, 2.0, 2.0).is_err());
        assert!(beta_pdf(1.0, 2.0, 2.0).is_err());
        assert!(beta_pdf(0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn beta_pdf_integrates_to_one() {
        for p in 1..=5 {
            for q in 1..=5 {
                let integral = simpson(|x| beta_pdf(x, p as f64, q as f64).unwrap(), 20_000);
                assert!(
                    (integral - 1.0).abs() < 1e-6,
                    "integral of Beta({p},{q}) = {integral}"
                );
            }
        }
    }

    #[test]
    fn beta_pdf_mean_matches_posterior_mean() {
        for p in 1..=5 {
            for q in 1..=5 {
                let mean = simpson(|x| x * beta_pdf(x, p as f64, q as f64).unwrap(), 20_000);
                let expected = p as f64 / (p + q) as f64;
                assert!(
                    (mean - expected).abs() < 1e-6,
                    "mean of Beta({p},{q}) = {mean}, expected {expected}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn weights_sum_to_one(
            credibilities in proptest::collection::vec(1e-6f64..1e3, 1..1000)
        ) {
            let w = normalize_weights(&credibilities).unwrap();
            let sum: f64 = w.weights().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(w.weights().iter().all(|x| *x >= 0.0));
            // ordering preserved: larger credibility never gets less weight
            let mut order: Vec<usize> = (0..credibilities.len()).collect();
            order.sort_by(|a, b| credibilities[*a].partial_cmp(&credibilities[*b]).unwrap());
            for pair in order.windows(2) {
                prop_assert!(w.weights()[pair[0]] <= w.weights()[pair[1]]);
            }
        }

        #[test]
        fn observation_order_does_not_matter(
            flags in proptest::collection::vec(proptest::bool::ANY, 0..40)
        ) {
            let mut forward = CredibilityState::new(2, 4).unwrap();
            for f in &flags {
                forward = forward.observe(if *f { 1.0 } else { -1.0 });
            }
            let mut backward = CredibilityState::new(2, 4).unwrap();
            for f in flags.iter().rev() {
                backward = backward.observe(if *f { 1.0 } else { -1.0 });
            }
            prop_assert_eq!(forward, backward);
        }

        #[test]
        fn delta_sign_is_scale_invariant(
            global in 1e-6f64..1e6,
            received in 0.0f64..1e6,
            scale in 1e-6f64..1e6,
        ) {
            prop_assume!((global - received).abs() > 1e-9 * global);
            let a = effectiveness_delta(global, received).unwrap();
            let b = effectiveness_delta(global * scale, received * scale).unwrap();
            prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
            prop_assert_eq!(a > 0.0, b > 0.0);
        }
    }
}
