//! Result tables written as CSV with a `#` config footer.

use std::io::Write;

use super::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    /// Header, rows, then `# <stamp>`.
    pub fn write_csv<W: Write>(&self, out: W, stamp: &str) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        let mut out = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
        writeln!(out, "# {stamp}")?;
        out.flush()?;
        Ok(())
    }
}

/// Shortest round-trip scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_footer() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), num(0.25)]);
        t.push(vec!["x,y".into(), num(1e-9)]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf, "experiment=damping").unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "a,b\n1,2.5e-1\n\"x,y\",1e-9\n# experiment=damping\n"
        );
    }
}
