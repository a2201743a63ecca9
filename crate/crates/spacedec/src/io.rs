//! File formats used by the experiment harness: MatrixMarket matrices,
//! RFC-4180 CSV, and plain edge lists.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Mat;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a real MatrixMarket file in either `array` or `coordinate` format.
pub fn read_matrix_market(path: &Path) -> Result<Mat> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty MatrixMarket file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() < 4 || !fields[0].eq_ignore_ascii_case("%%MatrixMarket") {
        return Err(parse_err(1, "expected a %%MatrixMarket header"));
    }
    if !fields[1].eq_ignore_ascii_case("matrix") {
        return Err(parse_err(1, format!("unsupported object {}", fields[1])));
    }
    let layout = fields[2].to_ascii_lowercase();
    let field = fields[3].to_ascii_lowercase();
    if field != "real" && field != "integer" {
        return Err(parse_err(1, format!("unsupported field type {field}")));
    }
    let symmetric = fields
        .get(4)
        .map(|s| s.eq_ignore_ascii_case("symmetric"))
        .unwrap_or(false);

    let mut data_lines = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (sizeno, size_line) = data_lines
        .next()
        .ok_or_else(|| parse_err(2, "missing size line"))?;
    let sizes: Vec<&str> = size_line.split_whitespace().collect();

    match layout.as_str() {
        "array" => {
            if sizes.len() != 2 {
                return Err(parse_err(sizeno + 1, "array size line needs rows cols"));
            }
            let rows: usize = sizes[0]
                .parse()
                .map_err(|_| parse_err(sizeno + 1, "bad row count"))?;
            let cols: usize = sizes[1]
                .parse()
                .map_err(|_| parse_err(sizeno + 1, "bad column count"))?;
            let mut values = Vec::with_capacity(rows * cols);
            for (no, line) in data_lines {
                for tok in line.split_whitespace() {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| parse_err(no + 1, format!("bad number {tok}")))?;
                    values.push(v);
                }
            }
            if values.len() != rows * cols {
                return Err(parse_err(
                    sizeno + 1,
                    format!("expected {} entries, found {}", rows * cols, values.len()),
                ));
            }
            // array format stores column-major
            Ok(Mat::from_vec(rows, cols, values))
        }
        "coordinate" => {
            if sizes.len() != 3 {
                return Err(parse_err(sizeno + 1, "coordinate size line needs rows cols nnz"));
            }
            let rows: usize = sizes[0]
                .parse()
                .map_err(|_| parse_err(sizeno + 1, "bad row count"))?;
            let cols: usize = sizes[1]
                .parse()
                .map_err(|_| parse_err(sizeno + 1, "bad column count"))?;
            let nnz: usize = sizes[2]
                .parse()
                .map_err(|_| parse_err(sizeno + 1, "bad entry count"))?;
            let mut mat = Mat::zeros(rows, cols);
            let mut seen = 0;
            for (no, line) in data_lines {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(parse_err(no + 1, "coordinate entries need i j value"));
                }
                let i: usize = toks[0]
                    .parse()
                    .map_err(|_| parse_err(no + 1, "bad row index"))?;
                let j: usize = toks[1]
                    .parse()
                    .map_err(|_| parse_err(no + 1, "bad column index"))?;
                let v: f64 = toks[2]
                    .parse()
                    .map_err(|_| parse_err(no + 1, "bad value"))?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(parse_err(no + 1, "index out of range (1-based)"));
                }
                mat[(i - 1, j - 1)] = v;
                if symmetric {
                    mat[(j - 1, i - 1)] = v;
                }
                seen += 1;
            }
            if seen != nnz {
                return Err(parse_err(
                    sizeno + 1,
                    format!("expected {nnz} entries, found {seen}"),
                ));
            }
            Ok(mat)
        }
        other => Err(parse_err(1, format!("unsupported layout {other}"))),
    }
}

/// Writes a dense matrix in MatrixMarket `array` format.
pub fn write_matrix_market(path: &Path, mat: &Mat) -> Result<()> {
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix array real general\n");
    out.push_str(&format!("{} {}\n", mat.nrows(), mat.ncols()));
    for j in 0..mat.ncols() {
        for i in 0..mat.nrows() {
            out.push_str(&format!("{:.17e}\n", mat[(i, j)]));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes a matrix in MatrixMarket `coordinate` format, skipping zeros.
pub fn write_matrix_market_coordinate(path: &Path, mat: &Mat) -> Result<()> {
    let entries: Vec<(usize, usize, f64)> = (0..mat.nrows())
        .flat_map(|i| (0..mat.ncols()).map(move |j| (i, j)))
        .filter_map(|(i, j)| {
            let v = mat[(i, j)];
            (v != 0.0).then_some((i, j, v))
        })
        .collect();
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    out.push_str(&format!("{} {} {}\n", mat.nrows(), mat.ncols(), entries.len()));
    for (i, j, v) in entries {
        out.push_str(&format!("{} {} {:.17e}\n", i + 1, j + 1, v));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a 1-indexed "u v" edge list; returns 0-indexed edges and the
/// implied node count (max index, or the declared `nodes` override).
pub fn read_edge_list(path: &Path) -> Result<(usize, Vec<(usize, usize)>)> {
    let text = fs::read_to_string(path)?;
    let mut edges = Vec::new();
    let mut max_node = 0usize;
    for (no, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = t.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(parse_err(no + 1, "edge lines are \"u v\""));
        }
        let u: usize = toks[0]
            .parse()
            .map_err(|_| parse_err(no + 1, "bad node id"))?;
        let v: usize = toks[1]
            .parse()
            .map_err(|_| parse_err(no + 1, "bad node id"))?;
        if u == 0 || v == 0 {
            return Err(parse_err(no + 1, "node ids are 1-based"));
        }
        max_node = max_node.max(u).max(v);
        edges.push((u - 1, v - 1));
    }
    Ok((max_node, edges))
}

/// Minimal RFC-4180 CSV writer.
pub struct CsvWriter<W: Write> {
    inner: W,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    fn quote(field: &str) -> String {
        if field.contains(',') || field.contains('"') || field.contains('\n') || field.contains('\r')
        {
            format!("\"{}\"", field.replace('"', "\"\""))
        } else {
            field.to_string()
        }
    }

    pub fn write_record<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let row: Vec<String> = fields
            .into_iter()
            .map(|f| Self::quote(f.as_ref()))
            .collect();
        writeln!(self.inner, "{}", row.join(","))?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}
