use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::error::Result;

/// What the first line of every CSV records.
#[derive(Debug, Clone)]
pub struct Stamp {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

/// Opens `out` (stdout when `None`) and writes the stamp comment.
pub fn open_raw(out: Option<&Path>, stamp: &Stamp) -> Result<Box<dyn Write>> {
    let mut w: Box<dyn Write> = match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| crate::error::CliError::Io(format!("{}: {e}", p.display())))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    writeln!(w, "# compsum {} config={} seed={}", stamp.command, stamp.config_hash, stamp.seed)?;
    Ok(w)
}

pub struct Table {
    w: csv::Writer<Box<dyn Write>>,
}

impl Table {
    pub fn create(out: Option<&Path>, stamp: &Stamp, header: &[&str]) -> Result<Self> {
        let mut w = csv::Writer::from_writer(open_raw(out, stamp)?);
        w.write_record(header)?;
        Ok(Self { w })
    }

    pub fn row(&mut self, cells: &[Option<f64>]) -> Result<()> {
        self.w.write_record(cells.iter().map(|c| cell(*c)))?;
        Ok(())
    }

    pub fn labelled(&mut self, label: &str, cells: &[Option<f64>]) -> Result<()> {
        let mut rec = vec![label.to_string()];
        rec.extend(cells.iter().map(|c| cell(*c)));
        self.w.write_record(&rec)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip form; empty for missing or non-finite values.
pub fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x}"),
        Some(x) if x == f64::INFINITY => "inf".into(),
        _ => String::new(),
    }
}
