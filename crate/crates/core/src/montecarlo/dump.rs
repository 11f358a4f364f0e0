use std::io::{self, Write};

use super::PathOutcome;

/// One row per path: `crossed,n_inf,s_at_inf,s_at_sup`; uncrossed paths carry `inf`.
pub fn write_outcomes_csv<W: Write>(mut w: W, outcomes: &[PathOutcome]) -> io::Result<()> {
    writeln!(w, "crossed,n_inf,s_at_inf,s_at_sup")?;
    for o in outcomes {
        match o.n_inf {
            Some(n) => writeln!(w, "true,{n},{},{}", o.s_at_inf, o.s_at_sup)?,
            None => writeln!(w, "false,inf,inf,inf")?,
        }
    }
    Ok(())
}
