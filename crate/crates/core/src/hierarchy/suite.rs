//! A fixed battery comparing what plain, accelerated (with fair
//! nondeterminism alongside) and ω-stage machines decide, each instance
//! checked against a ground truth small enough to compute outright.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::godel;
use crate::lang::parse;
use crate::machine::{decode_unary, encode_unary, run, Machine, RunError, RunOutcome};
use crate::nondet::{machine_F, FPolicy, FVerdict};
use crate::ordinal::{AcceleratedOutput, LimitPolicy};
use crate::par;
use crate::relativized::characteristic_machine;

use super::omega::{exact_small_set, omega_simulates_oracle_machine, HaltingSet};
use super::predicate::{accelerated_decides_sigma1, Predicate};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    /// Inputs for the parity decider.
    pub plain: Vec<u64>,
    /// Codes whose halting is asked.
    pub sigma1: Vec<u64>,
    /// Inputs for the halting-set characteristic function.
    pub delta2: Vec<u64>,
    /// Step budget for every run in the battery.
    pub budget: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            plain: (0..12).collect(),
            sigma1: (0..24).collect(),
            delta2: (0..12).collect(),
            budget: 10_000,
        }
    }
}

impl SuiteConfig {
    pub fn empty() -> Self {
        SuiteConfig {
            plain: Vec::new(),
            sigma1: Vec::new(),
            delta2: Vec::new(),
            budget: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub input: u64,
    /// `None` when the ground truth itself could not be settled.
    pub truth: Option<bool>,
    pub verdict: Option<bool>,
    /// Extra model-specific detail.
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub family: String,
    pub class: String,
    pub question: String,
    pub instances: Vec<Instance>,
    pub agree: usize,
    pub disagree: usize,
    pub unresolved: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapabilityReport {
    pub sections: Vec<Section>,
    pub notes: Vec<String>,
}

impl CapabilityReport {
    pub fn disagreements(&self) -> usize {
        self.sections.iter().map(|s| s.disagree).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

fn section(family: &str, class: &str, question: &str, instances: Vec<Instance>) -> Section {
    let mut s = Section {
        family: family.into(),
        class: class.into(),
        question: question.into(),
        agree: 0,
        disagree: 0,
        unresolved: 0,
        instances,
    };
    for i in &s.instances {
        match (i.truth, i.verdict) {
            (Some(t), Some(v)) if t == v => s.agree += 1,
            (Some(_), Some(_)) => s.disagree += 1,
            _ => s.unresolved += 1,
        }
    }
    s
}

fn parity() -> Machine {
    parse(include_str!("../../../../figures/parity.tm")).expect("parity machine parses")
}

/// Halting of the pair coded by `code`, settled by a long run with loop
/// detection.
fn halting_truth(code: u64, budget: u64) -> Option<bool> {
    let (m, input) = godel::decode_code(code);
    match run(&m, encode_unary(input), budget, true) {
        Ok(RunOutcome::Halted { .. }) => Some(true),
        Ok(RunOutcome::NonHaltingProven { .. }) | Err(RunError::LeftEdge { .. }) => Some(false),
        Ok(RunOutcome::BudgetExceeded { .. }) => None,
    }
}

fn plain_section(cfg: &SuiteConfig) -> Section {
    let m = parity();
    let instances = par::map(&cfg.plain, |&n| {
        let out = run(&m, encode_unary(n), cfg.budget, false).ok();
        let verdict = out
            .as_ref()
            .and_then(|o| o.halted_config())
            .and_then(|c| decode_unary(&c.tape).ok())
            .map(|v| v == 1);
        Instance {
            input: n,
            truth: Some(n % 2 == 0),
            verdict,
            detail: out.map_or("left edge".into(), |o| o.label().to_string()),
        }
    });
    section("turing", "Delta_1", "is n even?", instances)
}

fn sigma1_section(cfg: &SuiteConfig) -> Section {
    let halting = Predicate::halting();
    let policy = LimitPolicy::exact(cfg.budget);
    let f_policy = FPolicy {
        detect_loops: true,
        proof_budget: cfg.budget,
    };
    let instances = par::map(&cfg.sigma1, |&code| {
        let acc = accelerated_decides_sigma1(&halting, code, &policy);
        let verdict = match acc {
            Ok(AcceleratedOutput::One) => Some(true),
            Ok(AcceleratedOutput::Zero) => Some(false),
            _ => None,
        };
        let f = machine_F(&BigUint::from(code), cfg.budget, f_policy);
        let f_text = match &f {
            FVerdict::Halts { witness } => format!("halts at {witness}"),
            FVerdict::Loops { certificate } => format!("{} certificate", certificate.kind()),
            FVerdict::Unknown => "unknown".into(),
        };
        // Negation is one extra step on the output, but a 0 only ever came
        // from a certificate.
        let negated = verdict.map(|v| u8::from(!v));
        Instance {
            input: code,
            truth: halting_truth(code, cfg.budget.saturating_mul(10)),
            verdict,
            detail: format!(
                "accelerated {}; F {f_text}; negated output {}",
                match acc {
                    Ok(a) => format!("{a:?}").to_lowercase(),
                    Err(e) => e.to_string(),
                },
                negated.map_or("none".into(), |v| v.to_string())
            ),
        }
    });
    section("accelerated", "Sigma_1", "does the coded pair halt?", instances)
}

fn delta2_section(cfg: &SuiteConfig) -> Section {
    let Some(&top) = cfg.delta2.iter().max() else {
        return section("omega", "Delta_2", "is n in the halting set?", Vec::new());
    };
    let exact = exact_small_set(&HaltingSet, top + 1, cfg.budget);
    let chi = characteristic_machine();
    let instances = par::map(&cfg.delta2, |&n| {
        let truth = halting_truth(n, cfg.budget);
        let Some(exact) = &exact else {
            return Instance {
                input: n,
                truth,
                verdict: None,
                detail: "exact oracle unavailable".into(),
            };
        };
        match omega_simulates_oracle_machine(&chi, encode_unary(n), &HaltingSet, exact, cfg.budget) {
            Ok(r) => Instance {
                input: n,
                truth,
                verdict: r.published.map(|v| v == 1),
                detail: format!(
                    "{} branches, {} kills, {}",
                    r.branches.len(),
                    r.audit.len(),
                    if r.resolved { "resolved" } else { "limit value" }
                ),
            },
            Err(e) => Instance {
                input: n,
                truth,
                verdict: None,
                detail: e.to_string(),
            },
        }
    });
    section("omega", "Delta_2", "is n in the halting set?", instances)
}

/// Runs the battery. Sections with no instances are left out.
pub fn capability_suite(cfg: &SuiteConfig) -> CapabilityReport {
    let mut sections = Vec::new();
    if !cfg.plain.is_empty() {
        sections.push(plain_section(cfg));
    }
    if !cfg.sigma1.is_empty() {
        sections.push(sigma1_section(cfg));
    }
    if !cfg.delta2.is_empty() {
        sections.push(delta2_section(cfg));
    }
    if sections.is_empty() {
        return CapabilityReport::default();
    }
    let mut notes = Vec::new();
    if !cfg.sigma1.is_empty() {
        notes.push(
            "Sigma_1: a 1 is read off a halt; a 0 needs a non-halting certificate. Negating the output is a \
             single extra step, yet the negated question is Pi_1 and its 1-side inherits the need for certificates."
                .to_string(),
        );
    }
    notes.push(
        "Delta_omega: every sentence of arithmetic within omega^2 steps is a limit claim; only fixed levels \
         are exercised here."
            .to_string(),
    );
    CapabilityReport { sections, notes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_battery() {
        let r = capability_suite(&SuiteConfig::default());
        assert_eq!(r.sections.len(), 3);
        for s in &r.sections {
            assert!(s.instances.len() >= 10, "{}", s.family);
            assert_eq!(s.disagree, 0, "{}", s.family);
            assert!(s.agree >= 10, "{} agreed on {}", s.family, s.agree);
        }
    }

    #[test]
    fn empty_battery() {
        let r = capability_suite(&SuiteConfig::empty());
        assert_eq!(r, CapabilityReport::default());
        assert_eq!(r.to_json(), CapabilityReport::default().to_json());
    }

    #[test]
    fn deterministic_bytes() {
        let cfg = SuiteConfig {
            sigma1: (0..12).collect(),
            ..SuiteConfig::default()
        };
        assert_eq!(capability_suite(&cfg).to_json(), capability_suite(&cfg).to_json());
    }
}
