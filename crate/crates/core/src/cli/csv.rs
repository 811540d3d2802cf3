use std::io;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

/// Floats are written with 17 significant digits in scientific notation,
/// which round-trips every `f64` and does not depend on the platform.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    /// Artifact kind written to the `#schema:` line.
    pub kind: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new(kind: &str, columns: Vec<String>) -> Self {
        Self {
            kind: kind.to_string(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "ragged row in {}", self.kind);
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = format!("#schema: {} v1 columns={}\n", self.kind, self.columns.join(";"));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|c| match *c {
                Cell::Float(v) => format_float(v),
                Cell::Int(v) => v.to_string(),
            }))
            .expect("in-memory write");
        }
        let body = w.into_inner().expect("in-memory flush");
        out.push_str(std::str::from_utf8(&body).expect("ASCII content"));
        out
    }
}

pub fn write_csv(table: &CsvTable, path: &Path) -> io::Result<()> {
    std::fs::write(path, table.render())
}
