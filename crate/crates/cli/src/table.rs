//! Comma-separated tables with a one-line header.

use std::fmt::Write as _;
use std::path::Path;

use discrim::design::Design;
use discrim::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Format("empty table".into()))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != header.len() {
                return Err(Error::Format(format!("row {} has {} cells, header has {}", i + 1, row.len(), header.len())));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| Error::Format(format!("no column '{name}'")))
    }

    pub fn f64_column(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column(name)?;
        self.rows.iter().map(|r| parse_f64(&r[c])).collect()
    }
}

/// Shortest representation that parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Format(format!("not a number: '{s}'")))
}

/// Blocks joined by `|`, coordinates within a block by `;`.
pub fn fmt_design(d: &Design) -> String {
    d.blocks
        .iter()
        .map(|b| b.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(";"))
        .collect::<Vec<_>>()
        .join("|")
}

pub fn parse_design(s: &str) -> Result<Design> {
    let blocks = s
        .split('|')
        .map(|b| if b.is_empty() { Ok(Vec::new()) } else { b.split(';').map(parse_f64).collect() })
        .collect::<Result<Vec<_>>>()?;
    Ok(Design::new(blocks))
}
