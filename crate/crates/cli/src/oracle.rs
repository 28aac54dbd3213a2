//! Oracle machines, dovetailed stages and input channels.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Subcommand};
use hypersim::dovetail::halting_stage;
use hypersim::hierarchy::iterate_jump_codes;
use hypersim::machine::{decode_unary, encode_unary, Symbol};
use hypersim::relativized::{
    channel_spacing, characteristic_machine, compute_re_via_halting_oracle, coupled_input, coupled_reader,
    decide_three_ways, run_coupled, run_o_machine, BitSource, Channel, FiniteSet, HaltingOracle, OracleRun,
};
use serde_json::json;

use crate::report::{load_machine, outcome_code, parse_list, Failure, Report};

#[derive(Subcommand)]
pub enum OracleCmd {
    /// Characteristic function of the oracle at `n`, by an O-machine.
    Char {
        #[arg(long)]
        input: u64,
        /// Finite oracle set, e.g. `2,5,7` or `0..10`.
        #[arg(long, conflicts_with = "halting")]
        set: Option<String>,
        /// Use the halting set (semi-decided under `--budget`).
        #[arg(long)]
        halting: bool,
        #[arg(long, default_value_t = 10_000)]
        budget: u64,
    },
    /// Evaluate a semi-computable function by asking the halting oracle first.
    Re {
        file: PathBuf,
        #[arg(long)]
        input: u64,
        #[arg(long, default_value_t = 10_000)]
        budget: u64,
    },
    /// One bit source read three ways: inscribed, by channel, by oracle.
    Web {
        /// 64-bit word whose bit `n` is `g(n)`, in hex.
        #[arg(long)]
        word: String,
        #[arg(long, default_value_t = 64)]
        count: u64,
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
    },
    /// Dovetailed stage of the halting set over codes `0..count`.
    Stage {
        #[arg(long, default_value_t = 64)]
        count: u64,
        /// Total simulation steps shared by all members.
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
    },
    /// Iterated jumps over codes read as oracle machines.
    Jump {
        #[arg(long, default_value = "0..64")]
        codes: String,
        /// One budget per level, e.g. `10000,10000`.
        #[arg(long, default_value = "10000,10000")]
        budgets: String,
    },
}

fn o_report(run: &OracleRun) -> Report {
    let json = json!({
        "outcome": run.outcome.label(),
        "output": run.output(),
        "queries": run.queries,
        "pending_query": run.pending_query,
    });
    let mut text = format!("outcome: {}\n", run.outcome.label());
    for (q, a) in &run.queries {
        text.push_str(&format!("  asked {q}: {}\n", if *a { "member" } else { "nonmember" }));
    }
    if let Some(q) = run.pending_query {
        text.push_str(&format!("  waiting on {q}\n"));
    }
    if let Some(v) = run.output() {
        text.push_str(&format!("output: {v}\n"));
    }
    Report::new(json, text).with_code(outcome_code(&run.outcome))
}

pub fn oracle(c: OracleCmd) -> Result<Report, Failure> {
    match c {
        OracleCmd::Char {
            input,
            set,
            halting,
            budget,
        } => {
            let m = characteristic_machine();
            let run = if halting {
                run_o_machine(&m, &HaltingOracle { budget }, encode_unary(input), budget)
            } else {
                let set: FiniteSet = parse_list(set.as_deref().unwrap_or(""))
                    .map_err(Failure::config)?
                    .into_iter()
                    .collect();
                run_o_machine(&m, &set, encode_unary(input), budget)
            }
            .map_err(Failure::run)?;
            Ok(o_report(&run))
        }
        OracleCmd::Re { file, input, budget } => {
            let f = load_machine(&file)?;
            let v =
                compute_re_via_halting_oracle(&f, input, &HaltingOracle { budget }, budget).map_err(Failure::run)?;
            Ok(Report::new(
                json!({ "input": input, "output": v }),
                format!("f({input}) = {v}"),
            ))
        }
        OracleCmd::Web { word, count, budget } => {
            let w = u64::from_str_radix(word.trim_start_matches("0x"), 16)
                .map_err(|_| Failure::config(format!("bad hex word {word:?}")))?;
            let g: BitSource = Arc::new(move |n| n < 64 && (w >> n) & 1 == 1);
            let mut rows = Vec::new();
            let mut text = String::from("  n  g  inscribed channel oracle\n");
            let mut disagree = 0;
            for n in 0..count {
                let [a, b, o] = decide_three_ways(&g, n, budget).map_err(Failure::run)?;
                let want = Some(g(n));
                if [a, b, o].iter().any(|x| *x != want) {
                    disagree += 1;
                }
                let show = |x: Option<bool>| x.map_or("-".to_string(), |v| u8::from(v).to_string());
                text.push_str(&format!(
                    "{n:>3}  {}  {:>9} {:>7} {:>6}\n",
                    u8::from(g(n)),
                    show(a),
                    show(b),
                    show(o)
                ));
                rows.push(json!({"n": n, "bit": g(n), "inscribed": a, "channel": b, "oracle": o}));
            }
            text.push_str(&format!("disagreements: {disagree}\n"));
            let code = u8::from(disagree > 0);
            Ok(Report::new(
                json!({"word": format!("{w:016x}"), "rows": rows, "disagreements": disagree}),
                text,
            )
            .with_code(code))
        }
        OracleCmd::Stage { count, budget } => {
            let t = halting_stage(count, budget);
            let json: serde_json::Value = serde_json::from_str(&t.to_json()).expect("tables serialise");
            let text = format!(
                "stage {}: {} halted {:?}\n{} proven non-halting\n{} open\n",
                t.stage,
                t.halted.len(),
                t.halted,
                t.proven.len(),
                count as usize - t.halted.len() - t.proven.len()
            );
            Ok(Report::new(json, text))
        }
        OracleCmd::Jump { codes, budgets } => {
            let codes = parse_list(&codes).map_err(Failure::config)?;
            let budgets = parse_list(&budgets).map_err(Failure::config)?;
            let e = iterate_jump_codes(&codes, &budgets);
            let mut text = String::new();
            for l in &e.levels {
                text.push_str(&format!(
                    "level {} ({} approximates {}, decides {}): {} halted, {} proven\n",
                    l.level,
                    l.budget,
                    l.set,
                    l.decides,
                    l.table.halted.len(),
                    l.table.proven.len()
                ));
            }
            Ok(Report::new(serde_json::to_value(&e).expect("levels serialise"), text))
        }
    }
}

#[derive(Args)]
pub struct CoupledArgs {
    /// Bits sent down the channel, e.g. `1011`.
    #[arg(long)]
    pub bits: String,
    /// Unary input `n`; the reader leaves bit `n` on square 1.
    #[arg(long, default_value_t = 0)]
    pub input: u64,
    /// Steps between channel events (default: enough for the reader).
    #[arg(long)]
    pub spacing: Option<u64>,
    /// Run this machine instead of the bundled reader.
    #[arg(long)]
    pub machine: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    pub budget: u64,
}

pub fn coupled(a: CoupledArgs) -> Result<Report, Failure> {
    let bits = a
        .bits
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Failure::config(format!("bits must be 0 or 1, got {c:?}"))),
        })
        .collect::<Result<Vec<bool>, _>>()?;
    let m = match &a.machine {
        Some(f) => load_machine(f)?,
        None => coupled_reader(),
    };
    let channel = Channel::serial_bits(bits, a.spacing.unwrap_or_else(|| channel_spacing(a.input)));
    let out = run_coupled(&m, &channel, coupled_input(a.input), a.budget).map_err(Failure::run)?;
    let cfg = out.halted_config();
    let bit = cfg.map(|c| u8::from(c.tape.get(1) == Symbol::ONE));
    let json = json!({
        "outcome": out.label(),
        "square1": bit,
        "tape": cfg.map(|c| c.tape.render_explicit()),
        "output": cfg.and_then(|c| decode_unary(&c.tape).ok()),
    });
    let text = format!(
        "outcome: {}\nsquare 1: {}\n",
        out.label(),
        bit.map_or("-".into(), |b| b.to_string())
    );
    Ok(Report::new(json, text).with_code(outcome_code(&out)))
}
