use std::fmt;

/// One CSV value.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(v) => Some(v as f64),
            Cell::Float(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Cell::Bool(b) => Some(b),
            _ => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => write!(f, "{v}"),
            Cell::Bool(v) => write!(f, "{v}"),
            Cell::Text(s) if s.contains([',', '"', '\n']) => write!(f, "\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Named columns and rows of cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn index(&self, column: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == column)
    }

    fn require(&self, column: &str) -> usize {
        self.index(column)
            .unwrap_or_else(|| panic!("no column `{column}` in {:?}", self.columns))
    }

    pub fn get(&self, row: usize, column: &str) -> &Cell {
        &self.rows[row][self.require(column)]
    }

    /// Numeric column; non-numeric cells become NaN.
    pub fn f64s(&self, column: &str) -> Vec<f64> {
        let j = self.require(column);
        self.rows.iter().map(|r| r[j].as_f64().unwrap_or(f64::NAN)).collect()
    }

    /// Boolean column; non-boolean cells count as `false`.
    pub fn bools(&self, column: &str) -> Vec<bool> {
        let j = self.require(column);
        self.rows.iter().map(|r| r[j].as_bool().unwrap_or(false)).collect()
    }

    fn write_lines(&self, prefix: &str, out: &mut String) {
        let line = |cells: Vec<String>| format!("{prefix}{}\n", cells.join(","));
        out.push_str(&line(self.columns.clone()));
        for r in &self.rows {
            out.push_str(&line(r.iter().map(|c| c.to_string()).collect()));
        }
    }
}

/// Raw per-trial rows plus per-cell aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable {
    pub raw: Table,
    pub agg: Table,
}

impl ExperimentTable {
    /// Raw header and rows, then the aggregate header and rows, each
    /// aggregate line prefixed with `#agg,`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        self.raw.write_lines("", &mut out);
        self.agg.write_lines("#agg,", &mut out);
        out
    }
}

/// Median of the finite entries; NaN when there are none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Largest finite entry; NaN when there are none.
pub fn max_finite(values: &[f64]) -> f64 {
    values
        .iter()
        .copied()
        .filter(|x| x.is_finite())
        .fold(f64::NAN, f64::max)
}

pub fn mean_bool(values: &[bool]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().filter(|&&b| b).count() as f64 / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut raw = Table::new(&["n", "x", "ok", "note"]);
        raw.push(vec![3usize.into(), 0.5.into(), true.into(), "a,b".into()]);
        let mut agg = Table::new(&["n", "rate"]);
        agg.push(vec![3usize.into(), 1.0.into()]);
        let csv = ExperimentTable { raw, agg }.to_csv();
        assert_eq!(csv, "n,x,ok,note\n3,0.5,true,\"a,b\"\n#agg,n,rate\n#agg,3,1\n");
    }

    #[test]
    fn floats_print_round_trip() {
        let v = 0.1 + 0.2;
        assert_eq!(Cell::Float(v).to_string().parse::<f64>().unwrap(), v);
        assert_eq!(Cell::Float(f64::NAN).to_string(), "NaN");
    }

    #[test]
    fn summaries() {
        assert_eq!(median(&[3.0, f64::NAN, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0]), 2.5);
        assert!(median(&[f64::NAN]).is_nan());
        assert_eq!(max_finite(&[1.0, f64::INFINITY, 2.0]), 2.0);
        assert_eq!(mean_bool(&[true, false, true, true]), 0.75);
    }
}
