//! Datasets of extended points with scores, stored as CSV.
//!
//! The header lists every variable, then `target`, then an optional `split`
//! column (`train`, `validation` or `test`). Excluded entries are written as
//! `EXC`; reals use 17 significant digits so files round-trip byte for byte.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::domain::{format_real, DomainError, ExtendedPoint, RoleGraph, VarIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "validation" => Some(Split::Validation),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("header: {0}")]
    Header(String),
    #[error("line {line}: {msg}")]
    Row { line: u64, msg: String },
    #[error("line {line}: {source}")]
    Domain { line: u64, source: DomainError },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub points: Vec<ExtendedPoint>,
    pub targets: Vec<f64>,
    pub splits: Option<Vec<Split>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Row indices assigned to `split`; empty when no split is recorded.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        match &self.splits {
            Some(s) => (0..s.len()).filter(|&i| s[i] == split).collect(),
            None => Vec::new(),
        }
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            points: rows.iter().map(|&i| self.points[i].clone()).collect(),
            targets: rows.iter().map(|&i| self.targets[i]).collect(),
            splits: self.splits.as_ref().map(|s| rows.iter().map(|&i| s[i]).collect()),
        }
    }

    pub fn read(g: &RoleGraph, reader: impl Read) -> Result<Dataset, DatasetError> {
        Self::read_inner(g, reader, true)
    }

    /// Points only; `target` and `split` columns are optional and ignored.
    pub fn read_points(g: &RoleGraph, reader: impl Read) -> Result<Vec<ExtendedPoint>, DatasetError> {
        Ok(Self::read_inner(g, reader, false)?.points)
    }

    pub fn load_points(g: &RoleGraph, path: impl AsRef<Path>) -> Result<Vec<ExtendedPoint>, DatasetError> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
        Self::read_points(g, std::io::BufReader::new(f))
    }

    fn read_inner(g: &RoleGraph, reader: impl Read, with_target: bool) -> Result<Dataset, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        let mut columns: Vec<Option<VarIndex>> = Vec::new();
        let (mut target, mut split) = (None, None);
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (i, h) in header.iter().enumerate() {
            if seen.insert(h.to_string(), i).is_some() {
                return Err(DatasetError::Header(format!("column `{h}` repeated")));
            }
            match h {
                "target" => target = Some(i),
                "split" => split = Some(i),
                _ => {
                    let v = g.var(h).map_err(|_| DatasetError::Header(format!("unknown column `{h}`")))?;
                    columns.push(Some(v));
                    continue;
                }
            }
            columns.push(None);
        }
        if with_target && target.is_none() {
            return Err(DatasetError::Header("missing `target` column".into()));
        }
        let split = split.filter(|_| with_target);
        for v in g.indices() {
            if !columns.contains(&Some(v)) {
                return Err(DatasetError::Header(format!("missing column `{}`", g.name(v))));
            }
        }

        let mut ds = Dataset { splits: split.map(|_| Vec::new()), ..Dataset::default() };
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let mut values = vec![crate::Value::Exc; g.len()];
            for (i, col) in columns.iter().enumerate() {
                if let Some(v) = col {
                    values[v.0] = g.parse_value(*v, &rec[i]).map_err(|source| DatasetError::Domain { line, source })?;
                }
            }
            let point = ExtendedPoint { values };
            g.check_extended(&point).map_err(|source| DatasetError::Domain { line, source })?;
            let y = match target.filter(|_| with_target) {
                Some(t) => rec[t]
                    .parse()
                    .ok()
                    .filter(|y: &f64| y.is_finite())
                    .ok_or_else(|| DatasetError::Row { line, msg: format!("bad target `{}`", &rec[t]) })?,
                None => f64::NAN,
            };
            if let (Some(i), Some(s)) = (split, ds.splits.as_mut()) {
                s.push(Split::parse(&rec[i]).ok_or_else(|| DatasetError::Row {
                    line,
                    msg: format!("bad split `{}`", &rec[i]),
                })?);
            }
            ds.points.push(point);
            ds.targets.push(y);
        }
        Ok(ds)
    }

    pub fn load(g: &RoleGraph, path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
        Self::read(g, std::io::BufReader::new(f))
    }

    pub fn write(&self, g: &RoleGraph, writer: impl Write) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = g.indices().map(|v| g.name(v).to_string()).collect();
        header.push("target".into());
        if self.splits.is_some() {
            header.push("split".into());
        }
        w.write_record(&header)?;
        for (i, p) in self.points.iter().enumerate() {
            let mut row: Vec<String> = g.indices().map(|v| g.format_value(v, p.get(v))).collect();
            row.push(format_real(self.targets[i]));
            if let Some(s) = &self.splits {
                row.push(s[i].to_string());
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|source| DatasetError::Io { path: String::new(), source })?;
        Ok(())
    }

    pub fn save(&self, g: &RoleGraph, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
        self.write(g, std::io::BufWriter::new(f))
    }
}

/// Train/validation/test counts for `n` rows at 50/25/25 by largest
/// remainder. `rotate` picks which of validation/test wins an exact tie and
/// is flipped whenever it is used.
pub fn split_counts(n: usize, rotate: &mut bool) -> [usize; 3] {
    let quota = [n as f64 * 0.5, n as f64 * 0.25, n as f64 * 0.25];
    let frac = |i: usize| quota[i] - quota[i].floor();
    let mut counts = quota.map(|q| q.floor() as usize);
    let left = n - counts.iter().sum::<usize>();
    let first = if *rotate { 2 } else { 1 };
    let rank = |i: usize| if i == 0 { 0 } else if i == first { 1 } else { 2 };
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(rank(a).cmp(&rank(b))));
    for &i in order.iter().take(left) {
        counts[i] += 1;
    }
    if (1..3).contains(&left) && frac(order[left - 1]) == frac(order[left]) {
        *rotate = !*rotate;
    }
    counts
}

/// Stratified 50/25/25 split: each group (e.g. inclusion signature) is
/// shuffled and cut by [`split_counts`].
pub fn stratified_split<R: Rng + ?Sized>(groups: &[usize], rng: &mut R) -> Vec<Split> {
    let mut by_group: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, &gid) in groups.iter().enumerate() {
        match by_group.iter_mut().find(|x| x.0 == gid) {
            Some(x) => x.1.push(i),
            None => by_group.push((gid, vec![i])),
        }
    }
    by_group.sort_by_key(|x| x.0);
    let mut out = vec![Split::Train; groups.len()];
    let mut rotate = false;
    for (_, mut rows) in by_group {
        rows.shuffle(rng);
        let [tr, va, _] = split_counts(rows.len(), &mut rotate);
        for (k, &r) in rows.iter().enumerate() {
            out[r] = if k < tr {
                Split::Train
            } else if k < tr + va {
                Split::Validation
            } else {
                Split::Test
            };
        }
    }
    out
}
