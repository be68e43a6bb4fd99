//! Artifact writers and their readers.
//!
//! Floating-point values are written with Rust's shortest round-trip
//! formatting, so every CSV reads back bit-identically.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::contour::Polyline;
use crate::error::{Error, Result};
use crate::optimizer::IterationRecord;

pub const HISTORY_FILE: &str = "history.csv";
pub const DENSITY_CSV_FILE: &str = "density_final.csv";
pub const DENSITY_PGM_FILE: &str = "density_final.pgm";
pub const SMOOTH_CSV_FILE: &str = "density_smooth.csv";
pub const CONTOUR_SVG_FILE: &str = "contours.svg";
pub const CONTOUR_CSV_FILE: &str = "contours.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

pub const HISTORY_HEADER: &str = "iter,compliance,volume,change,tau,beta";

pub(crate) fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub iter: usize,
    pub compliance: f64,
    pub volume: f64,
    pub change: f64,
    pub tau: Option<f64>,
    pub beta: f64,
}

impl From<&IterationRecord> for HistoryRow {
    fn from(r: &IterationRecord) -> Self {
        Self {
            iter: r.iter,
            compliance: r.compliance,
            volume: r.volume,
            change: r.change,
            tau: r.tau,
            beta: r.beta,
        }
    }
}

pub fn history_csv(records: &[IterationRecord]) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(HISTORY_HEADER);
    s.push('\n');
    for r in records {
        let tau = r.tau.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{},{},{}", r.iter, r.compliance, r.volume, r.change, tau, r.beta);
    }
    s
}

pub fn write_history(path: &Path, records: &[IterationRecord]) -> Result<()> {
    write_file(path, history_csv(records).as_bytes())
}

pub fn read_history(path: &Path) -> Result<Vec<HistoryRow>> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(HISTORY_HEADER) {
        return Err(parse_err(path, 1, format!("expected header `{HISTORY_HEADER}`")));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let n = k + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(parse_err(path, n, format!("expected 6 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| parse_err(path, n, format!("`{s}`: {e}")));
        rows.push(HistoryRow {
            iter: f[0].parse().map_err(|e| parse_err(path, n, format!("`{}`: {e}", f[0])))?,
            compliance: num(f[1])?,
            volume: num(f[2])?,
            change: num(f[3])?,
            tau: if f[4].is_empty() { None } else { Some(num(f[4])?) },
            beta: num(f[5])?,
        });
    }
    Ok(rows)
}

/// Element field as `nely` lines of `nelx` values, top row first.
pub fn field_csv(x: &[f64], nelx: usize, nely: usize) -> String {
    assert_eq!(x.len(), nelx * nely);
    let mut s = String::with_capacity(x.len() * 20);
    for iy in 0..nely {
        for ix in 0..nelx {
            if ix > 0 {
                s.push(',');
            }
            let _ = write!(s, "{}", x[ix * nely + iy]);
        }
        s.push('\n');
    }
    s
}

pub fn write_field(path: &Path, x: &[f64], nelx: usize, nely: usize) -> Result<()> {
    if x.len() != nelx * nely {
        return Err(Error::LengthMismatch {
            expected: nelx * nely,
            actual: x.len(),
        });
    }
    write_file(path, field_csv(x, nelx, nely).as_bytes())
}

/// Reads a field written by [`write_field`]; returns `(nelx, nely, x)` with
/// `x` in element order.
pub fn read_field(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let text = read_text(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let row = line
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|e| parse_err(path, k + 1, format!("`{s}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(path, k + 1, format!("expected {} values, found {}", first.len(), row.len())));
            }
        }
        rows.push(row);
    }
    let nely = rows.len();
    let nelx = rows.first().map_or(0, Vec::len);
    if nely == 0 || nelx == 0 {
        return Err(parse_err(path, 1, "empty field"));
    }
    let mut x = vec![0.0; nelx * nely];
    for (iy, row) in rows.iter().enumerate() {
        for (ix, &v) in row.iter().enumerate() {
            x[ix * nely + iy] = v;
        }
    }
    Ok((nelx, nely, x))
}

/// Binary greymap, black for solid.
pub fn density_pgm(x: &[f64], nelx: usize, nely: usize) -> Vec<u8> {
    let mut out = format!("P5\n{nelx} {nely}\n255\n").into_bytes();
    for iy in 0..nely {
        for ix in 0..nelx {
            let v = x[ix * nely + iy].clamp(0.0, 1.0);
            out.push((255.0 * (1.0 - v)).round() as u8);
        }
    }
    out
}

pub fn write_pgm(path: &Path, x: &[f64], nelx: usize, nely: usize) -> Result<()> {
    write_file(path, &density_pgm(x, nelx, nely))
}

/// Returns `(width, height, pixels)` of a binary 8-bit greymap.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(parse_err(path, 1, "truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(parse_err(path, 1, "not an 8-bit P5 greymap"));
    }
    let dim = |s: &str| s.parse::<usize>().map_err(|_| parse_err(path, 1, format!("bad dimension `{s}`")));
    let (w, h) = (dim(&fields[1])?, dim(&fields[2])?);
    let data = bytes.get(pos..).unwrap_or_default().to_vec();
    if data.len() != w * h {
        return Err(parse_err(path, 1, format!("expected {} pixels, found {}", w * h, data.len())));
    }
    Ok((w, h, data))
}

pub fn contours_csv(lines: &[Polyline]) -> String {
    let mut s = String::from("id,x,y\n");
    for (id, l) in lines.iter().enumerate() {
        for &(x, y) in &l.points {
            let _ = writeln!(s, "{id},{x},{y}");
        }
        if l.closed {
            if let Some(&(x, y)) = l.points.first() {
                let _ = writeln!(s, "{id},{x},{y}");
            }
        }
    }
    s
}

/// Polylines from a contour CSV. A polyline whose last point repeats its
/// first is returned closed.
pub fn read_contours(path: &Path) -> Result<Vec<Polyline>> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    if lines.next() != Some("id,x,y") {
        return Err(parse_err(path, 1, "expected header `id,x,y`"));
    }
    let mut out: Vec<Polyline> = Vec::new();
    let mut current: Option<usize> = None;
    for (k, line) in lines.enumerate() {
        let n = k + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(parse_err(path, n, "expected 3 fields"));
        }
        let id: usize = f[0].parse().map_err(|_| parse_err(path, n, format!("bad id `{}`", f[0])))?;
        let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err(path, n, format!("bad coordinate `{s}`")));
        let p = (num(f[1])?, num(f[2])?);
        if current != Some(id) {
            if id != out.len() {
                return Err(parse_err(path, n, format!("polyline ids must be consecutive, found {id}")));
            }
            out.push(Polyline {
                points: Vec::new(),
                closed: false,
            });
            current = Some(id);
        }
        out.last_mut().unwrap().points.push(p);
    }
    for l in &mut out {
        if l.points.len() > 2 && l.points.first() == l.points.last() {
            l.points.pop();
            l.closed = true;
        }
    }
    Ok(out)
}

/// Contours over the design domain, in element coordinates with y down.
pub fn contours_svg(lines: &[Polyline], nelx: usize, nely: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {nelx} {nely}\" width=\"{}\" height=\"{}\">",
        nelx * 5,
        nely * 5
    );
    let _ = writeln!(
        s,
        "<rect x=\"0\" y=\"0\" width=\"{nelx}\" height=\"{nely}\" fill=\"none\" stroke=\"#999\" stroke-width=\"0.2\"/>"
    );
    for l in lines {
        let tag = if l.closed { "polygon" } else { "polyline" };
        let pts: Vec<String> = l.points.iter().map(|(x, y)| format!("{x:.4},{y:.4}")).collect();
        let _ = writeln!(
            s,
            "<{tag} points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"0.25\"/>",
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `name` into `dir`, returning the full path.
pub(crate) fn emit(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    write_file(&path, contents)?;
    Ok(path)
}

/// `key: value` lines, in order.
pub fn parse_key_values(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            l.split_once(':')
                .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                .ok_or_else(|| parse_err(path, k + 1, "expected `key: value`"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn rec(iter: usize, tau: Option<f64>) -> IterationRecord {
        IterationRecord {
            iter,
            compliance: 31.0 + 1.0 / (iter as f64 + 3.0),
            volume: 0.5 - 1e-9,
            change: 0.1f64.powi(iter as i32),
            tau,
            smooth_compliance: None,
            beta: 1e-6,
            penalty: None,
        }
    }

    #[test]
    fn history_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join(HISTORY_FILE);
        let recs = vec![rec(1, None), rec(2, Some(0.0064)), rec(3, None)];
        write_history(&path, &recs).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("iter,compliance,volume,change,tau,beta\n"));
        assert!(text.lines().nth(1).unwrap().contains(",,"));
        let rows = read_history(&path).unwrap();
        let expect: Vec<HistoryRow> = recs.iter().map(HistoryRow::from).collect();
        assert_eq!(rows, expect);
    }

    #[test]
    fn field_round_trip_is_bit_identical() {
        let dir = tempdir().unwrap();
        let path = dir.path().join(DENSITY_CSV_FILE);
        let (nelx, nely) = (7, 3);
        let x: Vec<f64> = (0..21).map(|i| (i as f64 * 0.7310585786300049).sin().abs() + 1e-17).collect();
        write_field(&path, &x, nelx, nely).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), nely);
        assert!(text.lines().all(|l| l.split(',').count() == nelx));
        // first line holds the top row: elements (ix, 0)
        let first: f64 = text.lines().next().unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(first.to_bits(), x[nely].to_bits());
        let (rx, ry, back) = read_field(&path).unwrap();
        assert_eq!((rx, ry), (nelx, nely));
        assert!(x.iter().zip(&back).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn pgm_black_is_solid() {
        let dir = tempdir().unwrap();
        let path = dir.path().join(DENSITY_PGM_FILE);
        // 2x2: column 0 solid, column 1 void
        let x = [1.0, 1.0, 1e-3, 0.5];
        write_pgm(&path, &x, 2, 2).unwrap();
        let (w, h, px) = read_pgm(&path).unwrap();
        assert_eq!((w, h), (2, 2));
        assert_eq!(px, vec![0, 255, 0, 128]);
    }

    #[test]
    fn contours_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join(CONTOUR_CSV_FILE);
        let lines = vec![
            Polyline {
                points: vec![(0.5, 0.25), (1.0, 0.75), (1.5, 0.25)],
                closed: false,
            },
            Polyline {
                points: vec![(2.0, 2.0), (3.0, 2.0), (3.0, 3.0)],
                closed: true,
            },
        ];
        write_file(&path, contours_csv(&lines).as_bytes()).unwrap();
        assert_eq!(read_contours(&path).unwrap(), lines);
        let svg = contours_svg(&lines, 4, 4);
        assert!(svg.contains("<polyline") && svg.contains("<polygon"));
    }

    #[test]
    fn malformed_inputs_report_lines() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "1,2\n3\n").unwrap();
        assert!(matches!(read_field(&path), Err(Error::Parse { line: 2, .. })));
        fs::write(&path, "iter,compliance,volume,change,tau,beta\n1,2,3\n").unwrap();
        assert!(matches!(read_history(&path), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read_field(&dir.path().join("missing.csv")), Err(Error::Io { .. })));
    }
}
