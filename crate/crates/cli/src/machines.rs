//! Plain, transfinite, networked, error-prone, probabilistic and
//! nondeterministic runs.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Subcommand};
use hypersim::dovetail::digits_with_separator;
use hypersim::machine::{decode_unary, encode_unary, run_observed, Configuration, RunOutcome, Tape};
use hypersim::nondet::{explore, machine_F, machine_f_on, nd_output, FPolicy, NDMachine};
use hypersim::ordinal::{
    detector_input, halting_detector, run_accelerated, run_ordinal, run_restricted_ittm, DesignatedOutput, LimitPolicy,
    OrdinalMachine, OrdinalOutcome, OrdinalStage,
};
use hypersim::relativized::{estimate, run_async_network, run_error_prone, ErrorFunction, TimingFunction};
use num_bigint::BigUint;
use serde_json::json;

use crate::report::{load_machine, outcome_code, parse_list, read_text, Failure, Report, BUDGET, HALTED};
use crate::trace::TraceEvent;
use crate::Format;

#[derive(Args)]
pub struct TapeArgs {
    /// Unary input `n`: a blank followed by `n` ones.
    #[arg(long, conflicts_with = "tape")]
    pub input: Option<u64>,
    /// Initial tape as glyphs, e.g. `0110#`.
    #[arg(long)]
    pub tape: Option<String>,
}

impl TapeArgs {
    pub fn tape(&self) -> Result<Tape, Failure> {
        match (&self.input, &self.tape) {
            (Some(n), _) => Ok(encode_unary(*n)),
            (None, Some(t)) => Tape::from_glyphs(t).ok_or_else(|| Failure::config(format!("bad tape {t:?}"))),
            (None, None) => Ok(Tape::blank()),
        }
    }
}

#[derive(Args)]
pub struct RunArgs {
    /// Machine file (`.tm`).
    pub file: PathBuf,
    #[command(flatten)]
    pub tape: TapeArgs,
    #[arg(long, default_value_t = 10_000)]
    pub budget: u64,
    /// Look for repeated or translated configurations.
    #[arg(long)]
    pub detect_loops: bool,
    /// Report the finalized digits printed with the `#` separator protocol.
    #[arg(long)]
    pub digits: bool,
    /// Emit one event per step.
    #[arg(long)]
    pub trace: bool,
    /// Squares shown either side of the head in trace events.
    #[arg(long, default_value_t = 6)]
    pub radius: usize,
}

fn outcome_text(o: &RunOutcome) -> String {
    match o {
        RunOutcome::Halted { config } => format!("halted after {} steps", config.steps),
        RunOutcome::NonHaltingProven { certificate } => format!(
            "never halts: {} certificate, period {}, from step {}",
            certificate.kind(),
            certificate.period(),
            certificate.start().steps
        ),
        RunOutcome::BudgetExceeded { frontier } => format!("budget exceeded at step {}", frontier.steps),
    }
}

fn final_config(o: &RunOutcome) -> &Configuration {
    match o {
        RunOutcome::Halted { config } => config,
        RunOutcome::NonHaltingProven { certificate } => certificate.start(),
        RunOutcome::BudgetExceeded { frontier } => frontier,
    }
}

pub fn run(a: RunArgs, format: Format) -> Result<Report, Failure> {
    let m = load_machine(&a.file)?;
    if a.digits {
        let p = digits_with_separator(&m, a.budget).map_err(|v| {
            Failure::run(format!(
                "square {} rewritten after being finalized (step {})",
                v.position, v.steps
            ))
        })?;
        let shown = if p.halted {
            p.digits.clone()
        } else {
            format!("{}…", p.digits)
        };
        let json = json!({"digits": p.digits, "steps": p.steps, "halted": p.halted});
        let code = if p.halted { HALTED } else { BUDGET };
        return Ok(Report::new(json, shown).with_code(code));
    }
    let mut events = Vec::new();
    let observe = |c: &Configuration| {
        if a.trace {
            events.push(TraceEvent::of(c, a.radius));
        }
    };
    let out = run_observed(
        &m,
        Configuration::initial(a.tape.tape()?),
        a.budget,
        a.detect_loops,
        observe,
    )
    .map_err(Failure::run)?;
    let end = final_config(&out);
    let output = out.halted_config().and_then(|c| decode_unary(&c.tape).ok());
    let mut json = json!({
        "outcome": out.label(),
        "steps": end.steps,
        "state": end.state,
        "head": end.head,
        "tape": end.tape.render_explicit(),
        "output": output,
    });
    if let Some(cert) = out.certificate() {
        json["certificate"] = serde_json::to_value(cert).expect("certificates serialise");
    }
    let mut text = String::new();
    if a.trace {
        json["trace"] = serde_json::to_value(&events).expect("events serialise");
        if format == Format::Text {
            for e in &events {
                text.push_str(&e.line());
                text.push('\n');
            }
        }
    }
    text.push_str(&format!("outcome: {}\n", outcome_text(&out)));
    text.push_str(&format!("tape: {}\n", end.tape.render_explicit()));
    if let Some(v) = output {
        text.push_str(&format!("output: {v}\n"));
    }
    Ok(Report::new(json, text).with_code(outcome_code(&out)))
}

#[derive(Args)]
pub struct LimitArgs {
    /// Steps per ω-block spent looking for a lasso.
    #[arg(long, default_value_t = 100_000)]
    pub block_budget: u64,
    /// Accept the tape at the horizon if nothing changed in this many final
    /// steps, instead of requiring a lasso.
    #[arg(long)]
    pub approx: Option<u64>,
}

impl LimitArgs {
    pub fn policy(&self) -> LimitPolicy {
        match self.approx {
            Some(w) => LimitPolicy::approx(self.block_budget, w),
            None => LimitPolicy::exact(self.block_budget),
        }
    }
}

#[derive(Subcommand)]
pub enum OrdinalCmd {
    /// Run up to an ordinal stage `w*a+b`.
    Run {
        file: PathBuf,
        #[arg(long, default_value = "w*1+0")]
        stage: OrdinalStage,
        #[command(flatten)]
        tape: TapeArgs,
        #[command(flatten)]
        limit: LimitArgs,
        /// Squares that carry information past limits (all by default).
        #[arg(long)]
        squares: Option<String>,
        /// Changes allowed per designated square.
        #[arg(long)]
        write_limit: Option<u64>,
        /// Blank every square outside the designated ones at each limit.
        #[arg(long)]
        restricted: bool,
        /// State entered at limits (default: the machine's own convention).
        #[arg(long)]
        limit_state: Option<usize>,
    },
    /// Decide halting of a machine on its input with one ω-stage.
    Halts {
        file: PathBuf,
        #[command(flatten)]
        tape: TapeArgs,
        #[command(flatten)]
        limit: LimitArgs,
    },
}

pub fn ordinal(c: OrdinalCmd) -> Result<Report, Failure> {
    match c {
        OrdinalCmd::Run {
            file,
            stage,
            tape,
            limit,
            squares,
            write_limit,
            restricted,
            limit_state,
        } => {
            let m = load_machine(&file)?;
            let om = match limit_state {
                Some(s) => OrdinalMachine::with_limit_state(m, s),
                None => OrdinalMachine::new(m),
            };
            let designated = match squares {
                Some(list) => DesignatedOutput::squares(
                    parse_list(&list)
                        .map_err(Failure::config)?
                        .into_iter()
                        .map(|p| p as usize),
                    write_limit,
                ),
                None => DesignatedOutput {
                    squares: None,
                    write_limit,
                },
            };
            let policy = limit.policy();
            let out = if restricted {
                run_restricted_ittm(&om, tape.tape()?, stage, &designated, &policy)
            } else {
                run_ordinal(&om, tape.tape()?, stage, &policy, &designated)
            }
            .map_err(Failure::run)?;
            Ok(ordinal_report(&out))
        }
        OrdinalCmd::Halts { file, tape, limit } => {
            let m = load_machine(&file)?;
            let input = detector_input(&tape.tape()?);
            let v = run_accelerated(&halting_detector(&m), input, &limit.policy()).map_err(Failure::run)?;
            let label = serde_json::to_value(v).unwrap();
            let text = format!("square 0 at stage w: {}", label.as_str().unwrap_or("?"));
            Ok(Report::new(json!({ "verdict": label }), text))
        }
    }
}

fn ordinal_report(out: &OrdinalOutcome) -> Report {
    let mut json = serde_json::to_value(out).expect("outcomes serialise");
    let mut text = String::new();
    let code = match out {
        OrdinalOutcome::HaltedAt { stage, config, exact }
        | OrdinalOutcome::ReachedStageLimit { stage, config, exact } => {
            let sq0 = config.tape.get(0).glyph();
            json["square0"] = json!(sq0);
            json["tape"] = json!(config.tape.render(config.tape.explicit_len().max(1)));
            text.push_str(&format!(
                "{} at {stage}{}\n",
                out.label(),
                if *exact { "" } else { " (horizon reading)" }
            ));
            text.push_str(&format!("limit square report: {sq0}\n"));
            text.push_str(&format!(
                "state {} head {} tape {}\n",
                config.state,
                config.head,
                config.tape.render(config.tape.explicit_len().max(1))
            ));
            if matches!(out, OrdinalOutcome::HaltedAt { .. }) {
                HALTED
            } else {
                0
            }
        }
        OrdinalOutcome::LimitUnresolved { stage, squares } => {
            text.push_str(&format!("limit at {stage} unresolved\n"));
            for (p, s) in squares {
                text.push_str(&format!("  square {p}: {s}\n"));
            }
            BUDGET
        }
    };
    Report::new(json, text).with_code(code)
}

#[derive(Args)]
pub struct AsyncArgs {
    /// Machine files; all share one tape and start on square 0.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Constant delay between actions, one per machine (default 1 each).
    #[arg(long)]
    pub delays: Option<String>,
    #[command(flatten)]
    pub tape: TapeArgs,
    /// Last global tick simulated.
    #[arg(long, default_value_t = 10_000)]
    pub budget: u64,
}

pub fn network(a: AsyncArgs) -> Result<Report, Failure> {
    let ms = a.files.iter().map(|f| load_machine(f)).collect::<Result<Vec<_>, _>>()?;
    let delays = match &a.delays {
        Some(d) => parse_list(d).map_err(Failure::config)?,
        None => vec![1; ms.len()],
    };
    let timings: Vec<TimingFunction> = delays.into_iter().map(TimingFunction::Constant).collect();
    let out = run_async_network(&ms, &timings, a.tape.tape()?, a.budget).map_err(Failure::run)?;
    let mut json = serde_json::to_value(&out).expect("outcomes serialise");
    json["tape"] = json!(out.tape.render_explicit());
    let mut text = format!("ticks: {}\ntape: {}\n", out.ticks, out.tape.render_explicit());
    for (i, n) in out.machines.iter().enumerate() {
        text.push_str(&format!(
            "machine {i}: {:?} after {} actions, state {} head {}\n",
            n.status, n.steps, n.state, n.head
        ));
    }
    Ok(Report::new(json, text))
}

#[derive(Args)]
pub struct ErrorsArgs {
    pub file: PathBuf,
    /// Writes (counted from 0) that come out wrong.
    #[arg(long, default_value = "")]
    pub flip: String,
    #[command(flatten)]
    pub tape: TapeArgs,
    #[arg(long, default_value_t = 10_000)]
    pub budget: u64,
    #[arg(long)]
    pub detect_loops: bool,
}

pub fn errors(a: ErrorsArgs) -> Result<Report, Failure> {
    let m = load_machine(&a.file)?;
    let flips: BTreeMap<u64, bool> = parse_list(&a.flip)
        .map_err(Failure::config)?
        .into_iter()
        .map(|n| (n, true))
        .collect();
    let r = run_error_prone(
        &m,
        &ErrorFunction::Table(flips),
        a.tape.tape()?,
        a.budget,
        a.detect_loops,
    )
    .map_err(Failure::run)?;
    let end = final_config(&r.outcome);
    let json = json!({
        "outcome": r.outcome.label(),
        "steps": end.steps,
        "tape": end.tape.render_explicit(),
        "flipped": r.flipped,
        "output": r.outcome.halted_config().and_then(|c| decode_unary(&c.tape).ok()),
    });
    let text = format!(
        "outcome: {}\ntape: {}\ncorrupted squares: {:?}\n",
        outcome_text(&r.outcome),
        end.tape.render_explicit(),
        r.flipped
    );
    Ok(Report::new(json, text).with_code(outcome_code(&r.outcome)))
}

#[derive(Args)]
pub struct ProbArgs {
    /// Machine with at most two instructions per state and symbol; a coin
    /// picks between two.
    pub file: PathBuf,
    #[arg(long, default_value_t = 1_000)]
    pub trials: u64,
    /// Required: every coin comes from this seed.
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub tape: TapeArgs,
    #[arg(long, default_value_t = 10_000)]
    pub budget: u64,
}

pub fn prob(a: ProbArgs) -> Result<Report, Failure> {
    let m =
        NDMachine::parse(&read_text(&a.file)?).map_err(|e| Failure::config(format!("{}:\n{e}", a.file.display())))?;
    let est = estimate(&m, &a.tape.tape()?, a.trials, a.seed, a.budget).map_err(Failure::run)?;
    let key = |k: &Option<u8>| k.map_or("none".to_string(), |v| v.to_string());
    let counts: BTreeMap<String, u64> = est.counts.iter().map(|(k, v)| (key(k), *v)).collect();
    let majority = est.majority.as_ref().map(key);
    let json = json!({
        "trials": est.trials,
        "seed": a.seed,
        "counts": counts,
        "majority": majority,
    });
    let mut text = format!("{} trials, seed {}\n", est.trials, a.seed);
    for (k, v) in &counts {
        text.push_str(&format!("  output {k}: {v}\n"));
    }
    text.push_str(&format!("majority: {}\n", majority.unwrap_or_else(|| "none".into())));
    Ok(Report::new(json, text))
}

#[derive(Subcommand)]
pub enum NondetCmd {
    /// Breadth-first computation tree.
    Explore {
        file: PathBuf,
        #[command(flatten)]
        tape: TapeArgs,
        #[arg(long, default_value_t = 50)]
        depth: u64,
        #[arg(long, default_value_t = 10_000)]
        nodes: usize,
    },
    /// The bounded halting function on a coded pair or a machine file.
    F {
        /// Code of a machine/input pair.
        #[arg(long, conflicts_with = "machine")]
        code: Option<String>,
        #[arg(long)]
        machine: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        input: u64,
        /// Largest step count tried.
        #[arg(long, default_value_t = 1_000)]
        cap: u64,
        #[arg(long, default_value_t = 10_000)]
        proof_budget: u64,
        /// Do not look for non-halting proofs.
        #[arg(long)]
        no_detect: bool,
    },
}

pub fn nondet(c: NondetCmd) -> Result<Report, Failure> {
    match c {
        NondetCmd::Explore {
            file,
            tape,
            depth,
            nodes,
        } => {
            let m = NDMachine::parse(&read_text(&file)?)
                .map_err(|e| Failure::config(format!("{}:\n{e}", file.display())))?;
            let t = explore(&m, tape.tape()?, depth, nodes);
            let out = nd_output(&t);
            let label = serde_json::to_value(out).unwrap();
            let json = json!({"output": label, "tree": t.to_json()});
            let text = format!(
                "output: {}\nnodes: {}, leaves: {}, divergent branches: {}\n",
                label.as_str().unwrap_or("?"),
                t.nodes.len(),
                t.leaves().count(),
                t.divergent.len()
            );
            Ok(Report::new(json, text))
        }
        NondetCmd::F {
            code,
            machine,
            input,
            cap,
            proof_budget,
            no_detect,
        } => {
            let policy = FPolicy {
                detect_loops: !no_detect,
                proof_budget,
            };
            let verdict = match (code, machine) {
                (Some(c), _) => {
                    let c: BigUint = c.parse().map_err(|_| Failure::config(format!("bad code {c:?}")))?;
                    machine_F(&c, cap, policy)
                }
                (None, Some(f)) => machine_f_on(&load_machine(&f)?, encode_unary(input), cap, policy),
                (None, None) => return Err(Failure::config("give --code or --machine")),
            };
            Ok(Report::value(&verdict))
        }
    }
}
