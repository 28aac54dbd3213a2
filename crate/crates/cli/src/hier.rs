//! Quantified predicates, the ω-stage simulation, the capability report and
//! the acceptance battery.

use std::path::PathBuf;

use clap::Subcommand;
use hypersim::acceptance;
use hypersim::hierarchy::{
    accelerated_decides_sigma1, capability_suite, eval_bounded, exact_small_set, omega_simulates_oracle_machine,
    parse_formula, sentence_to_predicate, HaltingSet, Predicate, SuiteConfig,
};
use hypersim::machine::encode_unary;
use hypersim::relativized::characteristic_machine;
use serde_json::json;

use crate::machines::LimitArgs;
use crate::report::{read_text, Failure, Report, BUDGET};

#[derive(Subcommand)]
pub enum HierCmd {
    /// Capability report: plain, accelerated and ω-stage machines against
    /// ground truth.
    Suite {
        /// JSON file overriding the default battery.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate a formula with every unbounded variable searched below a
    /// bound. A closed sentence needs no `--x`.
    Eval {
        formula: String,
        /// Name of the free variable.
        #[arg(long, default_value = "x")]
        var: String,
        #[arg(long, default_value_t = 0)]
        x: u64,
        #[arg(long, default_value_t = 1_000)]
        bound: u64,
        #[arg(long, default_value_t = 10_000)]
        kernel_budget: u64,
    },
    /// Decide a one-quantifier existential predicate with one ω-stage.
    Accel {
        formula: String,
        #[arg(long, default_value = "x")]
        var: String,
        #[arg(long, default_value_t = 0)]
        x: u64,
        #[command(flatten)]
        limit: LimitArgs,
    },
    /// Membership of `n` in the halting set by branching simulation of the
    /// characteristic O-machine.
    Omega {
        #[arg(long)]
        input: u64,
        #[arg(long, default_value_t = 10_000)]
        rounds: u64,
    },
}

fn predicate(formula: &str, var: &str) -> Result<Predicate, Failure> {
    let f = parse_formula(formula).map_err(Failure::config)?;
    let p = if f.free_vars().is_empty() {
        sentence_to_predicate(&f)
    } else {
        Predicate::from_formula(&f, var)
    };
    p.map_err(Failure::config)
}

pub fn hier(c: HierCmd) -> Result<Report, Failure> {
    match c {
        HierCmd::Suite { config } => {
            let cfg = match config {
                Some(path) => serde_json::from_str::<SuiteConfig>(&read_text(&path)?)
                    .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?,
                None => SuiteConfig::default(),
            };
            let r = capability_suite(&cfg);
            let mut text = String::new();
            for s in &r.sections {
                text.push_str(&format!(
                    "{:<12} {:<8} {:<28} agree {:>3}  disagree {}  unresolved {}\n",
                    s.family, s.class, s.question, s.agree, s.disagree, s.unresolved
                ));
            }
            for n in &r.notes {
                text.push_str(&format!("note: {n}\n"));
            }
            text.push_str(&format!("ground-truth disagreements: {}\n", r.disagreements()));
            let code = u8::from(r.disagreements() > 0);
            Ok(Report::new(serde_json::to_value(&r).expect("reports serialise"), text).with_code(code))
        }
        HierCmd::Eval {
            formula,
            var,
            x,
            bound,
            kernel_budget,
        } => {
            let p = predicate(&formula, &var)?;
            let v = eval_bounded(&p, x, bound, kernel_budget).map_err(Failure::run)?;
            Ok(Report::value(&v))
        }
        HierCmd::Accel { formula, var, x, limit } => {
            let p = predicate(&formula, &var)?;
            let v = accelerated_decides_sigma1(&p, x, &limit.policy()).map_err(Failure::run)?;
            let label = serde_json::to_value(v).unwrap();
            let label = label.as_str().unwrap_or("?");
            let code = if label == "unresolved" { BUDGET } else { 0 };
            let text = format!("square 0 at stage w: {label}");
            Ok(Report::new(json!({ "verdict": label }), text).with_code(code))
        }
        HierCmd::Omega { input, rounds } => {
            let exact = exact_small_set(&HaltingSet, input + 1, rounds)
                .ok_or_else(|| Failure::run(format!("cannot settle the halting set below {} exactly", input + 1)))?;
            let r = omega_simulates_oracle_machine(
                &characteristic_machine(),
                encode_unary(input),
                &HaltingSet,
                &exact,
                rounds,
            )
            .map_err(Failure::run)?;
            let text = format!(
                "published: {}\nresolved: {}\nrounds: {}, branches: {}, kills: {}\n",
                r.published.map_or("none".into(), |v| v.to_string()),
                r.resolved,
                r.rounds,
                r.branches.len(),
                r.audit.len()
            );
            Ok(Report::new(serde_json::to_value(&r).expect("runs serialise"), text))
        }
    }
}

pub fn suite() -> Result<Report, Failure> {
    let r = acceptance::suite();
    let mut text = String::new();
    for c in &r.criteria {
        text.push_str(&c.line());
        text.push('\n');
    }
    text.push_str(&format!(
        "capability report: {} ground-truth disagreements\n",
        r.capability.disagreements()
    ));
    let code = u8::from(!r.passed());
    Ok(Report::new(serde_json::to_value(&r).expect("reports serialise"), text).with_code(code))
}
