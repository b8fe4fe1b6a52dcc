//! CSV artifacts with a `#key=value` manifest header.

use std::fs;
use std::path::Path;

use crate::analysis::{ChainTable, ComparisonReport, ReplicaPoint, ReportRow};
use crate::chain::Trajectory;
use crate::error::{Error, Result};
use crate::gaussian_ode::MomentCurve;
use crate::limit::{EnsembleRun, EnsembleSnapshot, MomentPoint};

/// Ordered `key=value` metadata describing how an artifact was produced.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(subcommand: &str) -> Self {
        let mut m = Self::default();
        m.push("subcommand", subcommand);
        m.push("version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.push(key, value);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        let v = self.get(key).ok_or_else(|| Error::Format(format!("manifest lacks `{key}`")))?;
        v.parse().map_err(|_| Error::Format(format!("manifest `{key}` is not a number: {v}")))
    }
}

/// Shortest round-trip representation, in scientific notation for very
/// small or very large magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// A CSV document: manifest, header, and rows of preformatted fields.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub manifest: Manifest,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(manifest: Manifest, header: &[&str]) -> Self {
        Self { manifest, header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for (k, v) in &self.manifest.entries {
            if k.contains(['\n', '=']) || v.contains('\n') {
                return Err(Error::Format(format!("manifest entry `{k}` cannot be written")));
            }
            out.extend_from_slice(format!("#{k}={v}\n").as_bytes());
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|_| Error::Format("csv is not utf-8".into()))?;
        let mut manifest = Manifest::default();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let (k, v) =
                line[1..].split_once('=').ok_or_else(|| Error::Format(format!("bad manifest line `{line}`")))?;
            manifest.entries.push((k.to_string(), v.to_string()));
        }
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(bytes);
        let header = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { manifest, header, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read(path)?)
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| Error::Format(format!("missing column `{name}`")))
    }

    pub fn f64_at(&self, row: usize, col: usize) -> Result<f64> {
        let s = &self.rows[row][col];
        s.parse().map_err(|_| Error::Format(format!("row {row}: `{s}` is not a number")))
    }
}

pub const CHAIN_HEADER: [&str; 7] =
    ["replica", "t", "component_index", "position", "accepted_rate_window", "a_emp", "b_emp"];

/// Long-format chain output, one row per replica, time and stored component.
pub fn chain_table(manifest: Manifest, trs: &[Trajectory]) -> CsvTable {
    let mut t = CsvTable::new(manifest, &CHAIN_HEADER);
    for tr in trs {
        for s in &tr.snapshots {
            for (c, x) in s.positions.iter().enumerate() {
                t.push(vec![
                    tr.replica.to_string(),
                    fmt_f64(s.t),
                    (c + 1).to_string(),
                    fmt_f64(*x),
                    fmt_f64(s.acc_window),
                    fmt_f64(s.a_emp),
                    fmt_f64(s.b_emp),
                ]);
            }
        }
    }
    t
}

/// Rebuilds a [`ChainTable`] from [`chain_table`] output.
pub fn parse_chain(t: &CsvTable) -> Result<ChainTable> {
    let cols: Vec<usize> = CHAIN_HEADER.iter().map(|h| t.column(h)).collect::<Result<_>>()?;
    let mut times: Vec<f64> = Vec::new();
    let mut points: Vec<Vec<ReplicaPoint>> = Vec::new();
    let mut replicas: Vec<Vec<u64>> = Vec::new();
    for r in 0..t.rows.len() {
        let rep: u64 = t.rows[r][cols[0]].parse().map_err(|_| Error::Format(format!("row {r}: bad replica index")))?;
        let time = t.f64_at(r, cols[1])?;
        let comp: usize =
            t.rows[r][cols[2]].parse().map_err(|_| Error::Format(format!("row {r}: bad component index")))?;
        let i = match times.iter().position(|&s| s == time) {
            Some(i) => i,
            None => {
                times.push(time);
                points.push(Vec::new());
                replicas.push(Vec::new());
                times.len() - 1
            }
        };
        if replicas[i].last() != Some(&rep) {
            replicas[i].push(rep);
            points[i].push(ReplicaPoint {
                positions: Vec::new(),
                a_emp: t.f64_at(r, cols[5])?,
                b_emp: t.f64_at(r, cols[6])?,
                acc_window: t.f64_at(r, cols[4])?,
            });
        }
        let p = points[i].last_mut().expect("pushed above");
        if comp != p.positions.len() + 1 {
            return Err(Error::Format(format!("row {r}: components out of order")));
        }
        p.positions.push(t.f64_at(r, cols[3])?);
    }
    if times.is_empty() {
        return Err(Error::Empty("chain csv"));
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let reps = &replicas[order[0]];
    if order.iter().any(|&i| &replicas[i] != reps) {
        return Err(Error::GridMismatch("replicas differ across times".into()));
    }
    Ok(ChainTable {
        times: order.iter().map(|&i| times[i]).collect(),
        points: order.iter().map(|&i| points[i].clone()).collect(),
    })
}

/// Moment history `t, a, b`.
pub fn limit_table(manifest: Manifest, history: &[MomentPoint]) -> CsvTable {
    let mut t = CsvTable::new(manifest, &["t", "a", "b"]);
    for m in history {
        t.push(vec![fmt_f64(m.t), fmt_f64(m.a), fmt_f64(m.b)]);
    }
    t
}

/// Particle dump `t, particle, x` for every snapshot.
pub fn marginals_table(manifest: Manifest, snaps: &[EnsembleSnapshot]) -> CsvTable {
    let mut t = CsvTable::new(manifest, &["t", "particle", "x"]);
    for s in snaps {
        for (i, x) in s.particles.iter().enumerate() {
            t.push(vec![fmt_f64(s.t), i.to_string(), fmt_f64(*x)]);
        }
    }
    t
}

/// Rebuilds an [`EnsembleRun`] from a moment table and an optional dump.
pub fn parse_limit(history: &CsvTable, marginals: Option<&CsvTable>) -> Result<EnsembleRun> {
    let (ct, ca, cb) = (history.column("t")?, history.column("a")?, history.column("b")?);
    let hist = (0..history.rows.len())
        .map(|r| Ok(MomentPoint { t: history.f64_at(r, ct)?, a: history.f64_at(r, ca)?, b: history.f64_at(r, cb)? }))
        .collect::<Result<Vec<_>>>()?;
    let mut snapshots: Vec<EnsembleSnapshot> = Vec::new();
    if let Some(m) = marginals {
        let (ct, cx) = (m.column("t")?, m.column("x")?);
        for r in 0..m.rows.len() {
            let t = m.f64_at(r, ct)?;
            let x = m.f64_at(r, cx)?;
            match snapshots.last_mut() {
                Some(s) if s.t == t => s.particles.push(x),
                _ => snapshots.push(EnsembleSnapshot { t, particles: vec![x] }),
            }
        }
    }
    Ok(EnsembleRun { snapshots, history: hist })
}

pub fn ode_table(manifest: Manifest, curve: &MomentCurve) -> CsvTable {
    let mut t = CsvTable::new(manifest, &["t", "m"]);
    for &(s, m) in &curve.grid {
        t.push(vec![fmt_f64(s), fmt_f64(m)]);
    }
    t
}

pub const REPORT_HEADER: [&str; 8] =
    ["t", "w1_chain_vs_limit", "acc_emp", "acc_pred", "a_chain", "a_limit", "b_chain", "b_limit"];

pub fn report_table(manifest: Manifest, rep: &ComparisonReport) -> CsvTable {
    let mut m = manifest;
    for (k, v) in &rep.metadata {
        m.push(k.clone(), v);
    }
    let mut t = CsvTable::new(m, &REPORT_HEADER);
    for r in &rep.rows {
        t.push(
            [r.t, r.w1_chain_vs_limit, r.acc_emp, r.acc_pred, r.a_chain, r.a_limit, r.b_chain, r.b_limit]
                .iter()
                .map(|&x| fmt_f64(x))
                .collect(),
        );
    }
    t
}

pub fn parse_report(t: &CsvTable) -> Result<Vec<ReportRow>> {
    let c: Vec<usize> = REPORT_HEADER.iter().map(|h| t.column(h)).collect::<Result<_>>()?;
    (0..t.rows.len())
        .map(|r| {
            let g = |k: usize| t.f64_at(r, c[k]);
            Ok(ReportRow {
                t: g(0)?,
                w1_chain_vs_limit: g(1)?,
                acc_emp: g(2)?,
                acc_pred: g(3)?,
                a_chain: g(4)?,
                a_limit: g(5)?,
                b_chain: g(6)?,
                b_limit: g(7)?,
            })
        })
        .collect()
}
