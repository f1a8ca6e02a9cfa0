//! CSV traces of solver runs.
//!
//! A trace is an optional `# p_star = [..]` comment line followed by a CSV
//! table with one row per outer iteration. Floats are written with 17
//! significant digits so every value re-parses to the same bits.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use horoprox::manifold::{dist, Point, Space};
use horoprox::solver::IterationRecord;
use thiserror::Error;

const STAR_PREFIX: &str = "# p_star = ";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed trace: {0}")]
    Format(String),
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub mu: f64,
    pub f_q: f64,
    pub dist_pq: f64,
    pub busemann_residual: f64,
    pub norm_v: f64,
    pub norm_eps: f64,
    pub dist_to_pstar: Option<f64>,
    pub inner_iters: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl TraceRow {
    pub fn from_record(r: &IterationRecord, p_star: Option<&Point>) -> TraceRow {
        TraceRow {
            k: r.k,
            mu: r.mu,
            f_q: r.f_q,
            dist_pq: r.dist_pq,
            busemann_residual: r.busemann_residual,
            norm_v: r.v.norm(),
            norm_eps: r.eps.norm(),
            dist_to_pstar: p_star.and_then(|s| dist(&r.q, s).ok()),
            inner_iters: r.inner_iters,
            p: r.p.to_vec(),
            q: r.q.to_vec(),
        }
    }

    /// Rebuilds `(p_k, q_k)` as points of `space`.
    pub fn points(&self, space: Space) -> Result<(Point, Point), TraceError> {
        let mk = |c: &[f64]| Point::new(space, c.to_vec().into()).map_err(|e| TraceError::Format(e.to_string()));
        Ok((mk(&self.p)?, mk(&self.q)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub p_star: Option<Vec<f64>>,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn from_history(history: &[IterationRecord], p_star: Option<&Point>) -> Trace {
        Trace {
            p_star: p_star.map(Point::to_vec),
            rows: history.iter().map(|r| TraceRow::from_record(r, p_star)).collect(),
        }
    }

    fn ambient(&self) -> usize {
        self.rows.first().map(|r| r.p.len()).or(self.p_star.as_ref().map(Vec::len)).unwrap_or(0)
    }

    pub fn to_csv_string(&self) -> Result<String, TraceError> {
        let mut out = String::new();
        if let Some(s) = &self.p_star {
            let coords: Vec<String> = s.iter().map(|x| fmt_f64(*x)).collect();
            writeln!(out, "{STAR_PREFIX}[{}]", coords.join(", ")).expect("writing to a String");
        }
        let n = self.ambient();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> =
            ["k", "mu_k", "f_qk", "dist_pq", "busemann_residual", "norm_v", "norm_eps", "dist_to_pstar", "inner_iters"]
                .iter()
                .map(|s| s.to_string())
                .collect();
        header.extend((0..n).map(|i| format!("p_{i}")));
        header.extend((0..n).map(|i| format!("q_{i}")));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.k.to_string(),
                fmt_f64(r.mu),
                fmt_f64(r.f_q),
                fmt_f64(r.dist_pq),
                fmt_f64(r.busemann_residual),
                fmt_f64(r.norm_v),
                fmt_f64(r.norm_eps),
                r.dist_to_pstar.map(fmt_f64).unwrap_or_default(),
                r.inner_iters.to_string(),
            ];
            rec.extend(r.p.iter().chain(&r.q).map(|x| fmt_f64(*x)));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| TraceError::Io(e.into_error()))?;
        out.push_str(&String::from_utf8(bytes).expect("csv output is UTF-8"));
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Trace, TraceError> {
        let mut p_star = None;
        let mut body = text;
        if let Some(rest) = text.strip_prefix(STAR_PREFIX) {
            let (line, tail) = rest.split_once('\n').unwrap_or((rest, ""));
            let inner = line
                .trim()
                .strip_prefix('[')
                .and_then(|l| l.strip_suffix(']'))
                .ok_or_else(|| TraceError::Format(format!("bad p_star line: {line}")))?;
            p_star = Some(inner.split(',').map(|s| parse_f64(s.trim())).collect::<Result<Vec<_>, _>>()?);
            body = tail;
        }
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(body.as_bytes());
        let header = rdr.headers()?.clone();
        if header.len() < 9 || (header.len() - 9) % 2 != 0 {
            return Err(TraceError::Format(format!("unexpected column count {}", header.len())));
        }
        let n = (header.len() - 9) / 2;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let f = |i: usize| parse_f64(&rec[i]);
            let coords = |from: usize| (from..from + n).map(|i| parse_f64(&rec[i])).collect::<Result<Vec<_>, _>>();
            rows.push(TraceRow {
                k: parse_usize(&rec[0])?,
                mu: f(1)?,
                f_q: f(2)?,
                dist_pq: f(3)?,
                busemann_residual: f(4)?,
                norm_v: f(5)?,
                norm_eps: f(6)?,
                dist_to_pstar: if rec[7].is_empty() { None } else { Some(f(7)?) },
                inner_iters: parse_usize(&rec[8])?,
                p: coords(9)?,
                q: coords(9 + n)?,
            });
        }
        Ok(Trace { p_star, rows })
    }

    pub fn read(path: &Path) -> Result<Trace, TraceError> {
        Trace::parse(&std::fs::read_to_string(path)?)
    }
}

/// Writes `text` to a sibling temporary file and renames it over `path`, so
/// readers never see a partial trace.
pub fn write_atomic(path: &Path, text: &str) -> io::Result<()> {
    let name =
        path.file_name().ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str) -> Result<f64, TraceError> {
    s.parse().map_err(|_| TraceError::Format(format!("not a number: '{s}'")))
}

fn parse_usize(s: &str) -> Result<usize, TraceError> {
    s.parse().map_err(|_| TraceError::Format(format!("not an integer: '{s}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: usize) -> TraceRow {
        TraceRow {
            k,
            mu: 1.0,
            f_q: std::f64::consts::PI,
            dist_pq: 1e-300,
            busemann_residual: -0.0,
            norm_v: 0.1 + 0.2,
            norm_eps: 0.0,
            dist_to_pstar: if k == 0 { None } else { Some(f64::MIN_POSITIVE) },
            inner_iters: 7,
            p: vec![1.0 / 3.0, 2.0f64.sqrt()],
            q: vec![f64::MAX, -1e-17],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let t = Trace { p_star: Some(vec![0.1, 1.0 / 7.0]), rows: vec![row(0), row(1)] };
        let back = Trace::parse(&t.to_csv_string().unwrap()).unwrap();
        assert_eq!(back, t);
        assert!(back.rows[0].busemann_residual.is_sign_negative());
    }

    #[test]
    fn header_lists_coordinates() {
        let t = Trace { p_star: None, rows: vec![row(0)] };
        let s = t.to_csv_string().unwrap();
        assert!(s.starts_with(
            "k,mu_k,f_qk,dist_pq,busemann_residual,norm_v,norm_eps,dist_to_pstar,inner_iters,p_0,p_1,q_0,q_1\n"
        ));
    }
}
