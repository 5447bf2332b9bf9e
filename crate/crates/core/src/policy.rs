//! Deterministic treatment rules over natural and intervened treatment
//! histories.
//!
//! A [`Policy`] assigns the treatment at time `t` as a pure function
//! `d_t(s̄_t, ā^d_{t-1}, l̄_t)` of the natural treatment history `s̄_t`
//! (hypothetical values of what treatment *would have been*), the
//! intervened history, and the covariate history. Each rule declares the
//! natural-history lags it reads (its footprint); everything downstream —
//! augmented-frame sizes, influence-function path sums, targeting cells —
//! is driven by that declaration.
//!
//! The shipped constructors cover treatment delays for absorbing binary
//! exposures, delays of the first treatment initiation, dose-escalation
//! caps, escalation substitution rules, and the trivial identity/static
//! rules. Arbitrary rules are supported through [`Policy::from_rule`].

use std::sync::Arc;

use crate::error::{Error, Result};

/// Read-only view of the histories available to a rule at time `t`.
///
/// Natural values are indexed 1-based up to `t`; intervened values up to
/// `t - 1`. Implementations may poison coordinates the rule did not declare
/// (see [`Policy::footprint`]), so rules must only read what they declared.
pub trait RuleCtx {
    fn t(&self) -> usize;
    /// Natural treatment value `s_u`, `1 <= u <= t`.
    fn natural(&self, u: usize) -> f64;
    /// Intervened treatment value `a^d_u`, `1 <= u < t`.
    fn intervened(&self, u: usize) -> f64;
    /// Covariate `c` at time `u <= t`; built-in rules never read these.
    fn covariate(&self, u: usize, c: usize) -> f64;
}

/// Plain-slice rule context.
pub struct SliceCtx<'a> {
    pub t: usize,
    pub natural: &'a [f64],
    pub intervened: &'a [f64],
    pub covariates: &'a [&'a [f64]],
}

impl RuleCtx for SliceCtx<'_> {
    fn t(&self) -> usize {
        self.t
    }
    fn natural(&self, u: usize) -> f64 {
        self.natural[u - 1]
    }
    fn intervened(&self, u: usize) -> f64 {
        self.intervened[u - 1]
    }
    fn covariate(&self, u: usize, c: usize) -> f64 {
        self.covariates[u - 1][c]
    }
}

type Rule = Arc<dyn Fn(&dyn RuleCtx) -> f64 + Send + Sync>;

/// A deterministic treatment policy over a fixed horizon.
#[derive(Clone)]
pub struct Policy {
    tau: usize,
    label: String,
    footprints: Vec<Vec<usize>>,
    reads_current: Vec<bool>,
    rule: Rule,
}

impl std::fmt::Debug for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Policy")
            .field("tau", &self.tau)
            .field("label", &self.label)
            .field("footprints", &self.footprints)
            .field("reads_current", &self.reads_current)
            .finish()
    }
}

impl Policy {
    /// General constructor. `footprints[t-1]` lists the natural-history lags
    /// `u < t` read by `d_t`; `reads_current[t-1]` whether `d_t` reads the
    /// contemporaneous natural value `s_t`.
    pub fn from_rule<F>(
        tau: usize,
        label: &str,
        footprints: Vec<Vec<usize>>,
        reads_current: Vec<bool>,
        rule: F,
    ) -> Policy
    where
        F: Fn(&dyn RuleCtx) -> f64 + Send + Sync + 'static,
    {
        assert_eq!(footprints.len(), tau);
        assert_eq!(reads_current.len(), tau);
        let footprints = footprints
            .into_iter()
            .enumerate()
            .map(|(t0, mut fp)| {
                fp.sort_unstable();
                fp.dedup();
                assert!(fp.iter().all(|&u| u >= 1 && u <= t0), "footprint lag out of range at t={}", t0 + 1);
                fp
            })
            .collect();
        Policy { tau, label: label.to_string(), footprints, reads_current, rule: Arc::new(rule) }
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Declared natural-history lags read by `d_t` (a superset of the true
    /// sensitivity set; the contemporaneous value is not counted).
    pub fn footprint(&self, t: usize) -> &[usize] {
        &self.footprints[t - 1]
    }

    /// Whether `d_t` reads the contemporaneous natural value `s_t`.
    pub fn reads_current(&self, t: usize) -> bool {
        self.reads_current[t - 1]
    }

    /// Evaluate `d_t` on a rule context.
    pub fn apply_ctx(&self, ctx: &dyn RuleCtx) -> f64 {
        (self.rule)(ctx)
    }

    /// Evaluate `d_t` on explicit histories.
    pub fn apply(&self, t: usize, natural: &[f64], intervened: &[f64], covariates: &[&[f64]]) -> f64 {
        debug_assert_eq!(natural.len(), t);
        debug_assert!(intervened.len() + 1 >= t);
        (self.rule)(&SliceCtx { t, natural, intervened, covariates })
    }

    /// Evaluate `d_t` and verify the output lies in the declared support.
    pub fn apply_checked(
        &self,
        t: usize,
        natural: &[f64],
        intervened: &[f64],
        covariates: &[&[f64]],
        support: &[f64],
    ) -> Result<f64> {
        let v = self.apply(t, natural, intervened, covariates);
        if support.iter().any(|&s| s == v) {
            Ok(v)
        } else {
            Err(Error::SupportViolation(format!(
                "policy '{}' returned {v} at t={t}, outside the support {support:?}",
                self.label
            )))
        }
    }

    /// Replace the declared footprints with the full history `{1..t-1}` at
    /// every `t` (a valid superset), leaving the rule itself unchanged.
    /// Useful for checking that footprint reduction does not change results.
    pub fn with_full_footprint(&self) -> Policy {
        let mut p = self.clone();
        p.footprints = (0..self.tau).map(|t0| (1..=t0).collect()).collect();
        p.reads_current = vec![true; self.tau];
        p.label = format!("{}(full-augmentation)", self.label);
        p
    }

    /// The do-nothing rule `d_t = a_t`.
    pub fn identity(tau: usize) -> Policy {
        Policy::from_rule(tau, "identity", vec![vec![]; tau], vec![true; tau], |ctx| {
            ctx.natural(ctx.t())
        })
    }

    /// The static rule `d_t = value`.
    pub fn static_value(tau: usize, value: f64) -> Policy {
        Policy::from_rule(tau, &format!("static({value})"), vec![vec![]; tau], vec![false; tau], move |_| value)
    }

    /// Delay of an absorbing binary exposure by `kappa` timepoints:
    /// `d_t = 0` for `t <= kappa` and `d_t = s_{t-kappa}` afterwards, so the
    /// natural initiation time is shifted forward by `kappa`.
    pub fn delay_absorbing(tau: usize, kappa: usize) -> Policy {
        assert!(kappa >= 1, "delay must be at least one timepoint");
        let footprints = (0..tau)
            .map(|t0| {
                let t = t0 + 1;
                if t > kappa {
                    vec![t - kappa]
                } else {
                    vec![]
                }
            })
            .collect();
        Policy::from_rule(
            tau,
            &format!("delay({kappa})"),
            footprints,
            vec![false; tau],
            move |ctx| {
                let t = ctx.t();
                if t <= kappa {
                    0.0
                } else {
                    ctx.natural(t - kappa)
                }
            },
        )
    }

    /// Postpone the first natural initiation of a binary exposure by one
    /// timepoint: `d_t = 0` when `s_t = 1` and every earlier natural value
    /// is zero, otherwise `d_t = s_t`. On monotone (absorbing) natural
    /// histories this coincides with [`Policy::delay_absorbing`] with
    /// `kappa = 1`, but it never assigns treatment histories outside the
    /// support of an absorbing observed exposure process.
    pub fn delay_initiation(tau: usize) -> Policy {
        let footprints = (0..tau).map(|t0| (1..=t0).collect()).collect();
        Policy::from_rule(tau, "delay-initiation", footprints, vec![true; tau], |ctx| {
            let t = ctx.t();
            let a = ctx.natural(t);
            if a == 1.0 && (1..t).all(|u| ctx.natural(u) == 0.0) {
                0.0
            } else {
                a
            }
        })
    }

    /// Cap natural dose escalations at `delta`: for `t >= 2`,
    /// `d_t = s_{t-1} + delta` when `s_t - s_{t-1} > delta`, else `s_t`.
    /// Both doses entering the comparison are natural values.
    pub fn dose_cap(tau: usize, delta: f64) -> Policy {
        assert!(delta > 0.0, "maximum increase must be positive");
        let footprints = (0..tau).map(|t0| if t0 >= 1 { vec![t0] } else { vec![] }).collect();
        Policy::from_rule(
            tau,
            &format!("dose-cap({delta})"),
            footprints,
            vec![true; tau],
            move |ctx| {
                let t = ctx.t();
                let a = ctx.natural(t);
                if t == 1 {
                    return a;
                }
                let prev = ctx.natural(t - 1);
                if a - prev > delta {
                    prev + delta
                } else {
                    a
                }
            },
        )
    }

    /// Substitute the highest exposure level with a fallback until the top
    /// level has occurred naturally before: `d_t = fallback` when
    /// `s_t = top` and all earlier natural values are below `top`, else
    /// `d_t = s_t`. Models delaying an escalation of care.
    pub fn escalation_delay(tau: usize, top: f64, fallback: f64) -> Policy {
        let footprints = (0..tau).map(|t0| (1..=t0).collect()).collect();
        Policy::from_rule(
            tau,
            &format!("escalation-delay({top}->{fallback})"),
            footprints,
            vec![true; tau],
            move |ctx| {
                let t = ctx.t();
                let a = ctx.natural(t);
                if a == top && (1..t).all(|u| ctx.natural(u) < top) {
                    fallback
                } else {
                    a
                }
            },
        )
    }

    /// Variant of [`Policy::escalation_delay`] that checks the *intervened*
    /// history instead of the natural one, i.e. a rule that depends only on
    /// the contemporaneous natural value. Once an escalation has been
    /// substituted, this rule keeps suppressing it.
    pub fn escalation_delay_contemporaneous(tau: usize, top: f64, fallback: f64) -> Policy {
        Policy::from_rule(
            tau,
            &format!("escalation-delay-contemporaneous({top}->{fallback})"),
            vec![vec![]; tau],
            vec![true; tau],
            move |ctx| {
                let t = ctx.t();
                let a = ctx.natural(t);
                if a == top && (1..t).all(|u| ctx.intervened(u) < top) {
                    fallback
                } else {
                    a
                }
            },
        )
    }
}

/// Spec of a policy for configuration files.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    Identity,
    Static { value: f64 },
    Delay { kappa: usize },
    DelayInitiation,
    DoseCap { delta: f64 },
    EscalationDelay { top: f64, fallback: f64 },
}

impl PolicyConfig {
    pub fn build(&self, tau: usize) -> Result<Policy> {
        Ok(match self {
            PolicyConfig::Identity => Policy::identity(tau),
            PolicyConfig::Static { value } => Policy::static_value(tau, *value),
            PolicyConfig::Delay { kappa } => {
                if *kappa == 0 {
                    return Err(Error::InvalidConfig("delay kappa must be >= 1".into()));
                }
                Policy::delay_absorbing(tau, *kappa)
            }
            PolicyConfig::DelayInitiation => Policy::delay_initiation(tau),
            PolicyConfig::DoseCap { delta } => {
                if *delta <= 0.0 {
                    return Err(Error::InvalidConfig("dose cap delta must be > 0".into()));
                }
                Policy::dose_cap(tau, *delta)
            }
            PolicyConfig::EscalationDelay { top, fallback } => {
                Policy::escalation_delay(tau, *top, *fallback)
            }
        })
    }
}

/// Evaluate the intervened path `ā^d` a policy assigns along a fixed natural
/// path, with no covariates. Each `d_t` sees the natural values `s̄_t` and
/// the intervened values it has already assigned.
pub fn intervened_path(policy: &Policy, natural: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(natural.len());
    for t in 1..=natural.len() {
        let v = policy.apply(t, &natural[..t], &out, &[]);
        out.push(v);
    }
    out
}
