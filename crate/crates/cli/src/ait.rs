//! Program-size complexity, halting-probability bounds and the shift
//! function.

use std::path::PathBuf;

use clap::Subcommand;
use hypersim::ait::{
    bits_from_string, bits_to_string, decode, encode, enumerate_codes, k_search, omega_lower, read_code_table,
    shift_function, write_code_table, Decoder,
};
use hypersim::relativized::FiniteSet;
use hypersim::serialize;
use serde_json::json;

use crate::report::{load_machine, parse_list, Failure, Report};

#[derive(Subcommand)]
pub enum AitCmd {
    /// Lower bound on the halting probability from codes up to a length.
    Omega {
        #[arg(long, default_value_t = 14)]
        max_len: usize,
        /// Steps each code is run from a blank tape.
        #[arg(long, default_value_t = 10_000)]
        steps: u64,
        /// List every contributing code.
        #[arg(long)]
        list: bool,
    },
    /// Longest halting run among `n`-state binary machines.
    Shift {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        cap: u64,
    },
    /// Shortest codes producing each string as a finalized digit prefix.
    K {
        #[arg(required = true)]
        strings: Vec<String>,
        #[arg(long, default_value_t = 26)]
        max_len: usize,
        #[arg(long, default_value_t = 40)]
        steps: u64,
        /// Only machines that always move right.
        #[arg(long, conflicts_with = "oracle_set")]
        right_only: bool,
        /// Read codes as oracle machines asking this finite set.
        #[arg(long)]
        oracle_set: Option<String>,
    },
    /// Print the prefix-free code of a machine.
    Encode { file: PathBuf },
    /// Print the machine a code denotes.
    Decode { bits: String },
    /// Write every code up to a length to a binary code table, or read one
    /// back with `--read`.
    Table {
        #[arg(long, default_value_t = 12)]
        max_len: usize,
        #[arg(long, conflicts_with = "read")]
        out: Option<PathBuf>,
        #[arg(long)]
        read: Option<PathBuf>,
    },
}

pub fn ait(c: AitCmd) -> Result<Report, Failure> {
    match c {
        AitCmd::Omega { max_len, steps, list } => {
            let b = omega_lower(max_len, steps);
            let mut text = format!(
                "halting-probability lower bound: {}\nkraft sum: {}\ncodes: {}, halting: {}\n",
                b.lower,
                b.kraft,
                b.codes,
                b.contributions.len()
            );
            if list {
                for c in &b.contributions {
                    text.push_str(&format!("  {} ({} bits, {} steps)\n", c.code, c.length, c.steps));
                }
            }
            Ok(Report::new(serde_json::to_value(&b).expect("bounds serialise"), text))
        }
        AitCmd::Shift { n, cap } => {
            let r = shift_function(n, cap);
            let text = format!(
                "S({n}) = {}{}\nhalted {}, certified {} ({} by total tables), residue {}\n",
                r.max_steps,
                if r.exact { "" } else { " (lower bound: residue left)" },
                r.halted,
                r.certified,
                r.total_tables,
                r.residue.len()
            );
            let code = if r.exact { 0 } else { 3 };
            Ok(Report::new(serde_json::to_value(&r).expect("records serialise"), text).with_code(code))
        }
        AitCmd::K {
            strings,
            max_len,
            steps,
            right_only,
            oracle_set,
        } => {
            let set: Option<FiniteSet> = oracle_set
                .map(|s| parse_list(&s).map(|v| v.into_iter().collect()))
                .transpose()
                .map_err(Failure::config)?;
            let decoder = match (&set, right_only) {
                (Some(s), _) => Decoder::Relative(s),
                (None, true) => Decoder::RightOnly,
                (None, false) => Decoder::Plain,
            };
            let r = k_search(&strings, max_len, steps, decoder);
            let mut text = String::new();
            for s in &strings {
                match r.found.get(s) {
                    Some(e) => text.push_str(&format!("k({s}) = {} via {}\n", e.length, e.code)),
                    None => text.push_str(&format!("k({s}) > {max_len}\n")),
                }
            }
            Ok(Report::new(serde_json::to_value(&r).expect("searches serialise"), text))
        }
        AitCmd::Encode { file } => {
            let bits = bits_to_string(&encode(&load_machine(&file)?));
            Ok(Report::new(json!({"code": bits, "length": bits.len()}), bits))
        }
        AitCmd::Decode { bits } => {
            let b = bits_from_string(&bits).ok_or_else(|| Failure::config("codes are strings of 0 and 1"))?;
            let (m, used) = decode(&b).map_err(Failure::run)?;
            let listing = serialize(&m);
            let mut text = listing.clone();
            if used < b.len() {
                text.push_str(&format!("; {} trailing bits ignored\n", b.len() - used));
            }
            Ok(Report::new(json!({"machine": listing, "used": used}), text))
        }
        AitCmd::Table { max_len, out, read } => {
            if let Some(path) = read {
                let bytes = std::fs::read(&path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
                let codes = read_code_table(&bytes).map_err(Failure::run)?;
                let strings: Vec<String> = codes.iter().map(|c| bits_to_string(c)).collect();
                let text = strings.join("\n");
                return Ok(Report::new(json!({ "codes": strings }), text));
            }
            let codes = enumerate_codes(max_len);
            let bytes = write_code_table(&codes);
            let Some(path) = out else {
                return Err(Failure::config("give --out FILE or --read FILE"));
            };
            std::fs::write(&path, &bytes).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            Ok(Report::new(
                json!({"codes": codes.len(), "bytes": bytes.len()}),
                format!(
                    "wrote {} codes ({} bytes) to {}",
                    codes.len(),
                    bytes.len(),
                    path.display()
                ),
            ))
        }
    }
}
