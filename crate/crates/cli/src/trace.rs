use hypersim::machine::{Configuration, Tape};
use serde::Serialize;

/// One observed configuration. Events are ordered by stage, then step,
/// then branch.
#[derive(Clone, Debug, Serialize)]
pub struct TraceEvent {
    /// Ordinal stage `w*a+b`, for transfinite runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    pub step: u64,
    pub state: usize,
    pub head: usize,
    /// First square shown in `window`.
    pub from: usize,
    /// Glyphs of squares `from ..= head + radius`.
    pub window: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<u64>,
}

impl TraceEvent {
    pub fn of(c: &Configuration, radius: usize) -> Self {
        let from = c.head.saturating_sub(radius);
        TraceEvent {
            stage: None,
            step: c.steps,
            state: c.state,
            head: c.head,
            from,
            window: window(&c.tape, from, c.head + radius),
            annotation: None,
            branch: None,
        }
    }

    pub fn line(&self) -> String {
        let cells: String = self
            .window
            .iter()
            .enumerate()
            .map(|(i, g)| {
                if self.from + i == self.head {
                    format!("[{g}]")
                } else {
                    g.clone()
                }
            })
            .collect();
        let mut s = format!("{:>6} q{:<3} @{:<4} {cells}", self.step, self.state, self.head);
        if let Some(a) = &self.annotation {
            s.push_str("  ; ");
            s.push_str(a);
        }
        s
    }
}

fn window(tape: &Tape, from: usize, to: usize) -> Vec<String> {
    (from..=to).map(|p| tape.get(p).glyph()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_marks_the_head() {
        let mut c = Configuration::initial(Tape::from_glyphs("0110").unwrap());
        c.head = 2;
        let e = TraceEvent::of(&c, 1);
        assert_eq!(e.from, 1);
        assert_eq!(e.window, vec!["1", "1", "0"]);
        assert!(e.line().ends_with("1[1]0"));
    }
}
