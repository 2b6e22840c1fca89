//! CSV import/export. Every file may start with `#` comment lines carrying provenance; the
//! first non-comment line is the column header.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::metrics::{CorrelatorGrid, QslEntry};
use crate::propagate::EvolutionResult;
use crate::recursion::{ChainCoefficients, ChainMode, Provenance};
use crate::spectra::Spin;

/// Comment lines written above a table (without the leading `# `).
pub type Header = [String];

fn write_header<W: Write>(w: &mut W, header: &Header) -> Result<()> {
    for line in header {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

fn fmt(x: f64) -> String {
    // Shortest round-trip representation; deterministic across runs.
    format!("{x}")
}

fn table_writer<W: Write>(mut w: W, header: &Header, columns: &[&str]) -> Result<csv::Writer<W>> {
    write_header(&mut w, header)?;
    let mut out = csv::WriterBuilder::new().from_writer(w);
    out.write_record(columns)?;
    Ok(out)
}

/// A parsed table: comment lines, column names and raw string records.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Csv(format!("missing column '{name}' (found {:?})", self.columns)))
    }

    fn expect_columns(&self, names: &[&str]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.column(n)).collect()
    }

    fn number(&self, row: usize, col: usize) -> Result<f64> {
        let s = self.rows[row][col].trim();
        s.parse::<f64>()
            .map_err(|_| Error::Csv(format!("row {}: '{s}' in column '{}' is not a number", row + 1, self.columns[col])))
    }

    fn index(&self, row: usize, col: usize) -> Result<usize> {
        let s = self.rows[row][col].trim();
        s.parse::<usize>()
            .map_err(|_| Error::Csv(format!("row {}: '{s}' in column '{}' is not an index", row + 1, self.columns[col])))
    }
}

pub fn read_table<R: Read>(r: R) -> Result<Table> {
    let mut reader = BufReader::new(r);
    let mut comments = Vec::new();
    let mut body = String::new();
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim().to_string());
        } else {
            body.push_str(&line);
            reader.read_to_string(&mut body)?;
            break;
        }
    }
    let mut csv_reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(body.as_bytes());
    let columns: Vec<String> = csv_reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if columns.iter().all(|c| c.is_empty()) {
        return Err(Error::Csv("missing header row".into()));
    }
    let rows = csv_reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    Ok(Table { comments, columns, rows })
}

/// `omega,g` ensemble file.
pub fn write_ensemble<W: Write>(w: W, spins: &[Spin], header: &Header) -> Result<()> {
    let mut out = table_writer(w, header, &["omega", "g"])?;
    for s in spins {
        out.write_record([fmt(s.omega), fmt(s.g)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_ensemble<R: Read>(r: R) -> Result<Vec<Spin>> {
    let t = read_table(r)?;
    let c = t.expect_columns(&["omega", "g"])?;
    let spins = (0..t.rows.len())
        .map(|i| Ok(Spin { omega: t.number(i, c[0])?, g: t.number(i, c[1])? }))
        .collect::<Result<Vec<_>>>()?;
    if spins.is_empty() {
        return Err(Error::Csv("ensemble file has no rows".into()));
    }
    Ok(spins)
}

/// `n,alpha,beta` with β_n on the row of the site it couples to its predecessor (empty on row 0).
/// Mode, centre, g_eff, provenance and valid order go into a comment line.
pub fn write_coefficients<W: Write>(mut w: W, coeffs: &ChainCoefficients, header: &Header) -> Result<()> {
    write_header(&mut w, header)?;
    writeln!(
        w,
        "# provenance={} mode={} center={} g_eff={} valid_order={}",
        coeffs.provenance,
        coeffs.mode,
        fmt(coeffs.center),
        fmt(coeffs.g_eff),
        coeffs.valid_order
    )?;
    let mut out = csv::WriterBuilder::new().from_writer(w);
    out.write_record(["n", "alpha", "beta"])?;
    for (n, a) in coeffs.alphas.iter().enumerate() {
        let beta = if n == 0 { String::new() } else { fmt(coeffs.betas[n - 1]) };
        out.write_record([n.to_string(), fmt(*a), beta])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_coefficients<R: Read>(r: R) -> Result<ChainCoefficients> {
    let t = read_table(r)?;
    let c = t.expect_columns(&["n", "alpha", "beta"])?;
    let mut meta = std::collections::HashMap::new();
    for line in &t.comments {
        for kv in line.split_whitespace() {
            if let Some((k, v)) = kv.split_once('=') {
                meta.insert(k.to_string(), v.to_string());
            }
        }
    }
    let mut alphas = Vec::with_capacity(t.rows.len());
    let mut betas = Vec::with_capacity(t.rows.len());
    for i in 0..t.rows.len() {
        if t.index(i, c[0])? != i {
            return Err(Error::Csv(format!("row {} has n = {}, expected {i}", i + 1, t.rows[i][c[0]])));
        }
        alphas.push(t.number(i, c[1])?);
        if i > 0 {
            betas.push(t.number(i, c[2])?);
        }
    }
    if alphas.is_empty() {
        return Err(Error::Csv("coefficient file has no rows".into()));
    }
    let num = |k: &str, default: f64| -> Result<f64> {
        meta.get(k)
            .map(|v| v.parse::<f64>().map_err(|_| Error::Csv(format!("bad {k} '{v}'"))))
            .unwrap_or(Ok(default))
    };
    let mode = meta.get("mode").map(|m| m.parse()).transpose()?.unwrap_or(ChainMode::EnsembleOnly);
    let provenance = meta.get("provenance").map(|p| p.parse()).transpose()?.unwrap_or(Provenance::Imported);
    let center = num("center", alphas.iter().sum::<f64>() / alphas.len() as f64)?;
    let g_eff = num("g_eff", 1.0)?;
    let valid_order = num("valid_order", betas.len() as f64)? as usize;
    Ok(ChainCoefficients { alphas, betas, g_eff, center, mode, provenance, valid_order, asymptotic_beta: None })
}

/// Long-format amplitudes `t,n,re,im,prob`.
pub fn write_amplitudes<W: Write>(w: W, res: &EvolutionResult, header: &Header) -> Result<()> {
    let mut out = table_writer(w, header, &["t", "n", "re", "im", "prob"])?;
    for (k, &t) in res.times.iter().enumerate() {
        for n in 0..res.dim() {
            let c = res.amplitudes[(k, n)];
            out.write_record([fmt(t), n.to_string(), fmt(c.re), fmt(c.im), fmt(c.norm_sqr())])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `t,K`.
pub fn write_complexity<W: Write>(w: W, times: &[f64], k: &[f64], header: &Header) -> Result<()> {
    let mut out = table_writer(w, header, &["t", "K"])?;
    for (t, v) in times.iter().zip(k) {
        out.write_record([fmt(*t), fmt(*v)])?;
    }
    out.flush()?;
    Ok(())
}

/// `r,t,C`.
pub fn write_correlator<W: Write>(w: W, grid: &CorrelatorGrid, header: &Header) -> Result<()> {
    let mut out = table_writer(w, header, &["r", "t", "C"])?;
    for r in 0..=grid.r_max() {
        for (k, &t) in grid.times.iter().enumerate() {
            out.write_record([r.to_string(), fmt(t), fmt(grid.values[(r, k)])])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `i,j,F_target,tau`.
pub fn write_qsl<W: Write>(w: W, entries: &[QslEntry], header: &Header) -> Result<()> {
    let mut out = table_writer(w, header, &["i", "j", "F_target", "tau"])?;
    for e in entries {
        out.write_record([e.i.to_string(), e.j.to_string(), fmt(e.f_target), fmt(e.tau)])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a table whose columns are all numeric, checking the expected column names.
pub fn read_numeric<R: Read>(r: R, columns: &[&str]) -> Result<Vec<Vec<f64>>> {
    let t = read_table(r)?;
    let c = t.expect_columns(columns)?;
    (0..t.rows.len())
        .map(|i| c.iter().map(|&j| t.number(i, j)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recursion::closed_form_coefficients;
    use crate::spectra::SpectralDistribution;

    #[test]
    fn ensemble_round_trip() {
        let spins = vec![Spin { omega: -0.25, g: 0.1 }, Spin { omega: 1.0 / 3.0, g: 0.7 }];
        let mut buf = Vec::new();
        write_ensemble(&mut buf, &spins, &["test".to_string()]).unwrap();
        assert!(buf.starts_with(b"# test\nomega,g\n"));
        assert_eq!(read_ensemble(buf.as_slice()).unwrap(), spins);
    }

    #[test]
    fn ensemble_needs_header() {
        assert!(read_ensemble("0.1,0.2\n".as_bytes()).is_err());
        assert!(read_ensemble("omega,g\n0.1,abc\n".as_bytes()).is_err());
        assert!(read_ensemble("omega,g\n".as_bytes()).is_err());
    }

    #[test]
    fn coefficient_round_trip() {
        let d = SpectralDistribution::uniform(2.0, 0.5).unwrap();
        let c = closed_form_coefficients(&d, 9).unwrap();
        let mut buf = Vec::new();
        write_coefficients(&mut buf, &c, &[]).unwrap();
        let back = read_coefficients(buf.as_slice()).unwrap();
        assert_eq!(back.alphas, c.alphas);
        assert_eq!(back.betas, c.betas);
        assert_eq!(back.mode, c.mode);
        assert_eq!(back.provenance, c.provenance);
        assert_eq!(back.center, c.center);
    }

    #[test]
    fn numeric_reader_checks_columns() {
        let text = "# x\nt,K\n0,1\n0.5,1.25\n";
        let rows = read_numeric(text.as_bytes(), &["t", "K"]).unwrap();
        assert_eq!(rows, vec![vec![0.0, 1.0], vec![0.5, 1.25]]);
        assert!(read_numeric(text.as_bytes(), &["r", "t", "C"]).is_err());
    }
}
