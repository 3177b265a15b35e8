//! Reading back the TSV files written by `run`.

use std::collections::BTreeMap;

use crate::CliError;

/// A sensor trace: named numeric columns of equal length.
#[derive(Debug, Clone)]
pub struct TraceTable {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl TraceTable {
    pub fn parse(text: &str) -> Result<TraceTable, CliError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| malformed("trace", 1, "empty file"))?;
        let names: Vec<String> = header.split('\t').map(str::to_string).collect();
        if names.first().map(String::as_str) != Some("time") {
            return Err(malformed("trace", 1, "first column must be 'time'"));
        }
        let mut columns = vec![Vec::new(); names.len()];
        for (n, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != names.len() {
                return Err(malformed("trace", n + 2, "wrong number of columns"));
            }
            for (col, cell) in columns.iter_mut().zip(cells) {
                col.push(cell.parse().map_err(|_| malformed("trace", n + 2, "not a number"))?);
            }
        }
        Ok(TraceTable { names, columns })
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self) -> &[f64] {
        &self.columns[0]
    }

    /// First column whose name starts with `prefix`, with the rest of its name.
    pub fn find(&self, prefix: &str) -> Option<(&str, &[f64])> {
        self.names
            .iter()
            .position(|n| n.starts_with(prefix))
            .map(|i| (&self.names[i][prefix.len()..], self.columns[i].as_slice()))
    }
}

/// One snapshotted field over (t, x).
#[derive(Debug, Clone, Default)]
pub struct FieldSeries {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    /// `values[t][section]`
    pub values: Vec<Vec<f64>>,
}

impl FieldSeries {
    /// Largest change of any section over the run.
    pub fn range(&self) -> f64 {
        let lo = self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() {
            hi - lo
        } else {
            0.0
        }
    }
}

/// Full-field snapshots keyed by (field kind, species name).
pub type FieldTable = BTreeMap<(String, String), FieldSeries>;

pub fn parse_fields(text: &str) -> Result<FieldTable, CliError> {
    let mut table = FieldTable::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.starts_with("time\tfield\tspecies\tsection\tx\tvalue") => {}
        _ => return Err(malformed("fields", 1, "unexpected header")),
    }
    for (n, line) in lines {
        let cells: Vec<&str> = line.split('\t').collect();
        let [t, kind, name, section, x, value] = cells[..] else {
            return Err(malformed("fields", n + 1, "expected 6 columns"));
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| malformed("fields", n + 1, "not a number"));
        let (t, x, value) = (num(t)?, num(x)?, num(value)?);
        let section: usize = section.parse().map_err(|_| malformed("fields", n + 1, "bad section"))?;
        let series = table.entry((kind.to_string(), name.to_string())).or_default();
        if series.times.last() != Some(&t) {
            series.times.push(t);
            series.values.push(Vec::new());
        }
        let row = series.values.last_mut().expect("pushed above");
        if section != row.len() {
            return Err(malformed("fields", n + 1, "sections out of order"));
        }
        row.push(value);
        if series.times.len() == 1 {
            series.x.push(x);
        }
    }
    Ok(table)
}

fn malformed(what: &str, line: usize, why: &str) -> CliError {
    CliError::Malformed(format!("{what} file, line {line}: {why}"))
}
